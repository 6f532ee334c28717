//! Plain-text file formats: dataset CSV, run configuration, report tables.
//!
//! Machine-readable numbers are written with 17 significant digits so a
//! parse/serialize round trip reproduces every `f64` exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boost::BoostConfig;
use crate::data::{Arm, Covariates, Dataset, SurvivalObservation};
use crate::error::{Error, Result};
use crate::eval::{BenchmarkReport, CvGrid, PermutationResult, METRIC_NAMES};
use crate::simgen::SimConfig;
use crate::survival::{StepSurvivalCurve, TimeHorizon};
use crate::value::MembershipState;

const TRUE_GROUP: &str = "true_group";
const RESERVED: [&str; 4] = ["time", "event", "arm", TRUE_GROUP];

/// `%.17g`: shortest of fixed or exponent notation, trailing zeros dropped.
pub fn fmt_g17(x: f64) -> String {
    fmt_sig(x, 17)
}

/// Pretty JSON whose floats are written with 17 significant digits.
pub fn to_json_g17<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17Formatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Default)]
struct G17Formatter(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            w.write_all(fmt_g17(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Four significant digits, for human-facing reports.
pub fn fmt_g4(x: f64) -> String {
    fmt_sig(x, 4)
}

fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_binary(field: &str, row: usize, column: &str) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Format(format!(
            "row {row}: column `{column}` must be 0 or 1, got `{other}`"
        ))),
    }
}

fn parse_real(field: &str, row: usize, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("row {row}: column `{column}` is not a number: `{field}`")))
}

/// Reads `time,event,arm,<features...>[,true_group]`.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 3 || header[0] != "time" || header[1] != "event" || header[2] != "arm" {
        return Err(Error::Format(
            "header must start with `time,event,arm`".to_string(),
        ));
    }
    let has_truth = header.last().is_some_and(|h| h == TRUE_GROUP);
    let feature_end = if has_truth { header.len() - 1 } else { header.len() };
    let feature_names: Vec<String> = header[3..feature_end].to_vec();
    for (j, name) in feature_names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::Format(format!("feature column {} has no name", j + 1)));
        }
        if RESERVED.contains(&name.as_str()) {
            return Err(Error::Format(format!("unexpected column `{name}`")));
        }
        if feature_names[..j].contains(name) {
            return Err(Error::Format(format!("duplicate column `{name}`")));
        }
    }

    let mut observations = Vec::new();
    let mut values = Vec::new();
    let mut truth = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::Format(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let time = parse_real(&record[0], row, "time")?;
        let event = parse_binary(&record[1], row, "event")?;
        let arm = if parse_binary(&record[2], row, "arm")? {
            Arm::Experimental
        } else {
            Arm::Control
        };
        observations.push(SurvivalObservation::new(time, event, arm));
        for (j, name) in feature_names.iter().enumerate() {
            values.push(parse_real(&record[3 + j], row, name)?);
        }
        if has_truth {
            truth.push(parse_binary(&record[feature_end], row, TRUE_GROUP)?);
        }
    }
    let covariates = Covariates::from_row_major(observations.len(), feature_names.len(), values)?;
    Dataset::new(
        observations,
        covariates,
        feature_names,
        has_truth.then_some(truth),
    )
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let truth = data.true_membership();
    let mut header = vec!["time".to_string(), "event".into(), "arm".into()];
    header.extend(data.feature_names().iter().cloned());
    if truth.is_some() {
        header.push(TRUE_GROUP.into());
    }
    w.write_record(&header)?;
    let x = data.covariates();
    for (i, obs) in data.observations().iter().enumerate() {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(fmt_g17(obs.time_months));
        rec.push(u8::from(obs.event).to_string());
        rec.push(obs.arm.code().to_string());
        rec.extend(x.row(i).iter().map(|&v| fmt_g17(v)));
        if let Some(t) = truth {
            rec.push(u8::from(t[i]).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_file(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(data, std::fs::File::create(path)?)
}

/// `auto` (smaller per-arm maximum time) or a fixed number of months.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum HorizonPolicy {
    #[default]
    Auto,
    Fixed(f64),
}

impl HorizonPolicy {
    pub fn resolve(self, data: &Dataset) -> Result<TimeHorizon> {
        match self {
            HorizonPolicy::Auto => Ok(TimeHorizon::auto(data)),
            HorizonPolicy::Fixed(t) => TimeHorizon::new(t),
        }
    }
}

impl std::str::FromStr for HorizonPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(HorizonPolicy::Auto);
        }
        let t: f64 = s
            .parse()
            .map_err(|_| Error::param("tstar", format!("expected `auto` or months, got `{s}`")))?;
        TimeHorizon::new(t)?;
        Ok(HorizonPolicy::Fixed(t))
    }
}

impl Serialize for HorizonPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HorizonPolicy::Auto => s.serialize_str("auto"),
            HorizonPolicy::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for HorizonPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(t) => TimeHorizon::new(t)
                .map(|_| HorizonPolicy::Fixed(t))
                .map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Run configuration document. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigDoc {
    pub simulation: SimConfig,
    pub boost: BoostConfig,
    pub cv: CvGrid,
    pub horizon: HorizonPolicy,
    pub cutoff: f64,
    pub seed: u64,
}

impl Default for RunConfigDoc {
    fn default() -> Self {
        Self {
            simulation: SimConfig::default(),
            boost: BoostConfig::default(),
            cv: CvGrid::default(),
            horizon: HorizonPolicy::Auto,
            cutoff: 0.5,
            seed: 0,
        }
    }
}

impl RunConfigDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RunConfigDoc = serde_json::from_str(text)?;
        doc.boost.validate()?;
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn write_predictions<W: Write>(state: &MembershipState, members: &[bool], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row_index", "logit", "score", "membership"])?;
    for (i, (&f, &p)) in state.logits().iter().zip(state.scores()).enumerate() {
        w.write_record([
            i.to_string(),
            fmt_g17(f),
            fmt_g17(p),
            u8::from(members[i]).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `membership` column of a predictions file (or any CSV with one).
pub fn read_memberships<R: Read>(reader: R) -> Result<Vec<bool>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h.trim() == "membership")
        .ok_or_else(|| Error::Format("no `membership` column".into()))?;
    rdr.records()
        .enumerate()
        .map(|(r, rec)| parse_binary(&rec?[col], r + 1, "membership"))
        .collect()
}

/// One curve per `(subgroup, arm)` cell, as `subgroup,arm,time,survival`
/// rows starting with `(0, 1)`.
pub fn write_curves<W: Write>(curves: &[(bool, Arm, StepSurvivalCurve)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["subgroup", "arm", "time", "survival"])?;
    for (group, arm, curve) in curves {
        let g = u8::from(*group).to_string();
        let a = arm.code().to_string();
        w.write_record([g.as_str(), a.as_str(), "0", "1"])?;
        for (t, s) in curve.jump_times.iter().zip(&curve.survival_values) {
            w.write_record([g.clone(), a.clone(), fmt_g17(*t), fmt_g17(*s)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `scenario,setting,metric,mean,sd,replicates`, one row per metric.
pub fn write_benchmark<W: Write>(report: &BenchmarkReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scenario", "setting", "metric", "mean", "sd", "replicates"])?;
    for cell in &report.cells {
        for name in METRIC_NAMES {
            if let Some(s) = cell.summary_of(name) {
                w.write_record([
                    cell.scenario.to_string(),
                    cell.setting.to_string(),
                    s.metric.clone(),
                    fmt_g17(s.mean),
                    fmt_g17(s.sd),
                    s.count.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_null_draws<W: Write>(result: &PermutationResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["draw", "null_value"])?;
    for (b, v) in result.null_values.iter().enumerate() {
        w.write_record([b.to_string(), fmt_g17(*v)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_formatting() {
        assert_eq!(fmt_g17(10.0), "10");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(1e-7), "9.9999999999999995e-8");
        assert_eq!(fmt_g17(1e20), "1e20");
        assert_eq!(fmt_g4(9.78123), "9.781");
        assert_eq!(fmt_g4(0.5), "0.5");
        for x in [1.0 / 3.0, std::f64::consts::PI * 1e-9, 123456.789e10, -7.0e-300] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_validation() {
        let bad = [
            "event,time,arm,x\n1,1,0,0\n",
            "time,event,arm,x,x\n1,1,0,0,0\n",
            "time,event,arm,arm\n1,1,0,0\n",
            "time,event,arm,true_group,x\n1,1,0,0,0\n",
        ];
        for text in bad {
            assert!(read_dataset(text.as_bytes()).is_err(), "{text}");
        }
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(read_dataset("time,event,arm\n1,2,0\n2,1,1\n".as_bytes()).is_err());
        assert!(read_dataset("time,event,arm\nabc,1,0\n2,1,1\n".as_bytes()).is_err());
        assert!(read_dataset("time,event,arm\n1,1,0\n2,1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn reads_truth_column() {
        let d = read_dataset("time,event,arm,x,true_group\n1.5,1,0,0.25,1\n2,0,1,-1,0\n".as_bytes()).unwrap();
        assert_eq!(d.true_membership(), Some(&[true, false][..]));
        assert_eq!(d.covariates().get(1, 0), -1.0);
    }

    #[test]
    fn horizon_policy_parsing() {
        assert_eq!("auto".parse::<HorizonPolicy>().unwrap(), HorizonPolicy::Auto);
        assert_eq!("12.5".parse::<HorizonPolicy>().unwrap(), HorizonPolicy::Fixed(12.5));
        assert!("-1".parse::<HorizonPolicy>().is_err());
        let doc = RunConfigDoc::from_json(r#"{"horizon": 20, "cutoff": 0.4}"#).unwrap();
        assert_eq!(doc.horizon, HorizonPolicy::Fixed(20.0));
        assert!(RunConfigDoc::from_json(r#"{"horizon": "auto"}"#).is_ok());
        assert!(RunConfigDoc::from_json(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn g17_json_round_trips() {
        let v = vec![0.1, 1.0 / 3.0, -2.5e-9, 7.0];
        let text = to_json_g17(&v).unwrap();
        assert!(text.contains("0.10000000000000001"));
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }
}
