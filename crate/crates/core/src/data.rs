//! Outcome records, validation, CSV input/output and the Kaplan–Meier estimator.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CensoringStatus {
    RightCensored = 0,
    Event = 1,
    LeftCensored = 2,
    IntervalCensored = 3,
}

impl CensoringStatus {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(Self::RightCensored),
            1 => Some(Self::Event),
            2 => Some(Self::LeftCensored),
            3 => Some(Self::IntervalCensored),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub entry_time: f64,
    pub time: f64,
    pub upper_time: Option<f64>,
    pub status: CensoringStatus,
    pub covariates: Vec<f64>,
    /// One entry per clustering factor of the owning dataset; `None` when missing.
    pub cluster_labels: Vec<Option<String>>,
    /// Subject identifier used to group start/stop rows.
    pub id: Option<String>,
}

impl SurvivalRecord {
    /// Right-censored or event record without delayed entry or clusters.
    pub fn simple(time: f64, status: CensoringStatus, covariates: Vec<f64>) -> Self {
        SurvivalRecord {
            entry_time: 0.0,
            time,
            upper_time: None,
            status,
            covariates,
            cluster_labels: Vec::new(),
            id: None,
        }
    }

    fn check(&self, p: usize, n_factors: usize) -> std::result::Result<(), String> {
        let t = self.time;
        if !(t.is_finite() && t > 0.0) {
            return Err(format!("time {t} must be finite and positive"));
        }
        if !(self.entry_time.is_finite() && self.entry_time >= 0.0) {
            return Err(format!("entry time {} must be finite and non-negative", self.entry_time));
        }
        if self.entry_time >= t {
            return Err(format!("entry time {} is not before time {t}", self.entry_time));
        }
        match (self.status, self.upper_time) {
            (CensoringStatus::IntervalCensored, None) => {
                return Err("interval-censored record needs an upper time".into())
            }
            (CensoringStatus::IntervalCensored, Some(u)) if !(u.is_finite() && u > t) => {
                return Err(format!("upper time {u} must exceed time {t}"))
            }
            (CensoringStatus::IntervalCensored, Some(_)) => {}
            (_, Some(_)) => return Err("upper time is only allowed for interval-censored records".into()),
            (_, None) => {}
        }
        if self.covariates.len() != p {
            return Err(format!("expected {p} covariates, found {}", self.covariates.len()));
        }
        if let Some(x) = self.covariates.iter().find(|x| !x.is_finite()) {
            return Err(format!("covariate value {x} is not finite"));
        }
        if self.cluster_labels.len() != n_factors {
            return Err(format!(
                "expected {n_factors} cluster labels, found {}",
                self.cluster_labels.len()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SurvivalRecord>,
    pub covariate_names: Vec<String>,
    pub factor_names: Vec<String>,
    /// Observed levels per factor in order of first appearance.
    pub factor_levels: Vec<Vec<String>>,
}

impl Dataset {
    pub fn new(
        records: Vec<SurvivalRecord>,
        covariate_names: Vec<String>,
        factor_names: Vec<String>,
    ) -> Result<Self> {
        let p = covariate_names.len();
        let nf = factor_names.len();
        let mut factor_levels = vec![Vec::<String>::new(); nf];
        let mut seen: Vec<HashMap<String, usize>> = vec![HashMap::new(); nf];
        for (row, r) in records.iter().enumerate() {
            r.check(p, nf)
                .map_err(|reason| Error::InvariantViolation { row, reason })?;
            for (f, label) in r.cluster_labels.iter().enumerate() {
                if let Some(l) = label {
                    if !seen[f].contains_key(l) {
                        seen[f].insert(l.clone(), factor_levels[f].len());
                        factor_levels[f].push(l.clone());
                    }
                }
            }
        }
        let ds = Dataset {
            records,
            covariate_names,
            factor_names,
            factor_levels,
        };
        if !ds.records.is_empty() && !(ds.t_max().is_finite() && ds.t_max() > 0.0) {
            return Err(Error::InvariantViolation {
                row: 0,
                reason: "maximum time is not finite and positive".into(),
            });
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Largest of all entry, observed and upper times.
    pub fn t_max(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.time.max(r.entry_time).max(r.upper_time.unwrap_or(0.0)))
            .fold(0.0, f64::max)
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factor_names.iter().position(|c| c == name)
    }

    pub fn summary(&self) -> DatasetSummary {
        let mut s = DatasetSummary {
            observations: self.records.len(),
            ..Default::default()
        };
        for r in &self.records {
            match r.status {
                CensoringStatus::RightCensored => s.right_censored += 1,
                CensoringStatus::Event => s.events += 1,
                CensoringStatus::LeftCensored => s.left_censored += 1,
                CensoringStatus::IntervalCensored => s.interval_censored += 1,
            }
            if r.entry_time > 0.0 {
                s.delayed_entry += 1;
            }
        }
        s.t_max = self.t_max();
        s
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string(), "entry".into(), "time".into(), "upper".into(), "status".into()];
        header.extend(self.covariate_names.iter().cloned());
        header.extend(self.factor_names.iter().cloned());
        w.write_record(&header)?;
        for (i, r) in self.records.iter().enumerate() {
            let mut row = vec![
                r.id.clone().unwrap_or_else(|| (i + 1).to_string()),
                r.entry_time.to_string(),
                r.time.to_string(),
                r.upper_time.map(|u| u.to_string()).unwrap_or_default(),
                r.status.code().to_string(),
            ];
            row.extend(r.covariates.iter().map(f64::to_string));
            row.extend(r.cluster_labels.iter().map(|l| l.clone().unwrap_or_default()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub observations: usize,
    pub events: usize,
    pub right_censored: usize,
    pub left_censored: usize,
    pub interval_censored: usize,
    pub delayed_entry: usize,
    pub t_max: f64,
}

/// Column names used to read a dataset. Absent optional columns default to
/// entry time 0, no upper time and no subject id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub entry: Option<String>,
    pub time: String,
    pub upper: Option<String>,
    pub status: String,
    pub covariates: Vec<String>,
    pub factors: Vec<String>,
    pub id: Option<String>,
}

impl Schema {
    pub fn new(time: &str, status: &str) -> Self {
        Schema {
            entry: None,
            time: time.into(),
            upper: None,
            status: status.into(),
            covariates: Vec::new(),
            factors: Vec::new(),
            id: None,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: Read>(input: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let entry = schema.entry.as_deref().map(col).transpose()?;
    let time = col(&schema.time)?;
    let upper = schema.upper.as_deref().map(col).transpose()?;
    let status = col(&schema.status)?;
    let id = schema.id.as_deref().map(col).transpose()?;
    let covs = schema.covariates.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let facs = schema.factors.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|e| Error::ParseFailure {
                row,
                column: headers[i].to_string(),
                message: e.to_string(),
            })
        };
        let code = num(status)?;
        let status_v = (code.fract() == 0.0)
            .then(|| CensoringStatus::from_code(code as i64))
            .flatten()
            .ok_or_else(|| Error::ParseFailure {
                row,
                column: headers[status].to_string(),
                message: format!("status {code} is not one of 0, 1, 2, 3"),
            })?;
        let upper_v = match upper {
            Some(i) if !field(i).is_empty() && !field(i).eq_ignore_ascii_case("na") => Some(num(i)?),
            _ => None,
        };
        let labels = facs
            .iter()
            .map(|&i| {
                let s = field(i);
                (!s.is_empty() && !s.eq_ignore_ascii_case("na")).then(|| s.to_string())
            })
            .collect();
        records.push(SurvivalRecord {
            entry_time: entry.map(num).transpose()?.unwrap_or(0.0),
            time: num(time)?,
            upper_time: upper_v,
            status: status_v,
            covariates: covs.iter().map(|&i| num(i)).collect::<Result<_>>()?,
            cluster_labels: labels,
            id: id.map(|i| field(i).to_string()),
        });
    }
    Dataset::new(records, schema.covariates.clone(), schema.factors.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
}

impl KaplanMeierCurve {
    /// Right-continuous step function; 1 before the first event time.
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => 1.0,
            k => self.survival[k - 1],
        }
    }
}

/// Product-limit estimate. A record is at risk at `t` when `entry < t ≤ time`,
/// so deaths at a time are counted before censorings at that same time.
pub fn kaplan_meier(data: &Dataset) -> Result<KaplanMeierCurve> {
    if let Some(row) = data.records.iter().position(|r| {
        !matches!(r.status, CensoringStatus::RightCensored | CensoringStatus::Event)
    }) {
        return Err(Error::UnsupportedStatus(row));
    }
    let mut event_times: Vec<f64> = data
        .records
        .iter()
        .filter(|r| r.status == CensoringStatus::Event)
        .map(|r| r.time)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();

    let mut exits: Vec<f64> = data.records.iter().map(|r| r.time).collect();
    let mut entries: Vec<f64> = data.records.iter().map(|r| r.entry_time).collect();
    exits.sort_by(f64::total_cmp);
    entries.sort_by(f64::total_cmp);

    let mut s = 1.0;
    let mut survival = Vec::with_capacity(event_times.len());
    for &t in &event_times {
        let entered = entries.partition_point(|&e| e < t);
        let left = exits.partition_point(|&x| x < t);
        let at_risk = (entered - left) as f64;
        let deaths = data
            .records
            .iter()
            .filter(|r| r.status == CensoringStatus::Event && r.time == t)
            .count() as f64;
        s *= 1.0 - deaths / at_risk;
        survival.push(s);
    }
    Ok(KaplanMeierCurve {
        times: event_times,
        survival,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use CensoringStatus::*;

    fn schema() -> Schema {
        Schema {
            entry: Some("entry".into()),
            upper: Some("upper".into()),
            covariates: vec!["x".into()],
            ..Schema::new("time", "status")
        }
    }

    fn ds(records: Vec<SurvivalRecord>) -> Dataset {
        Dataset::new(records, vec![], vec![]).unwrap()
    }

    #[test]
    fn parses_a_row() {
        let csv = "entry,time,upper,status,x\n0,1.5,,1,0.0\n";
        let d = read_dataset(csv.as_bytes(), &schema()).unwrap();
        let r = &d.records[0];
        assert_eq!((r.entry_time, r.time, r.upper_time, r.status), (0.0, 1.5, None, Event));
        assert_eq!(r.covariates, vec![0.0]);
    }

    #[test]
    fn interval_without_upper_is_rejected() {
        let csv = "entry,time,upper,status,x\n0,1.5,,3,0.0\n";
        let e = read_dataset(csv.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(e, Error::InvariantViolation { row: 0, .. }));
    }

    #[test]
    fn entry_after_exit_is_rejected() {
        let csv = "entry,time,upper,status,x\n2.0,1.0,,1,0.0\n";
        let e = read_dataset(csv.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(e, Error::InvariantViolation { row: 0, .. }));
    }

    #[test]
    fn missing_column_and_bad_number() {
        let e = read_dataset("time,status\n1,1\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(e, Error::MissingColumn(c) if c == "entry"));
        let e = read_dataset("entry,time,upper,status,x\n0,abc,,1,0\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(e, Error::ParseFailure { row: 0, .. }));
        let e = read_dataset("entry,time,upper,status,x\n0,1,,7,0\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(e, Error::ParseFailure { .. }));
    }

    #[test]
    fn levels_and_summary() {
        let s = Schema {
            factors: vec!["site".into()],
            ..Schema::new("time", "status")
        };
        let csv = "time,status,site\n1,1,b\n2,0,a\n3,1,b\n4,1,\n";
        let d = read_dataset(csv.as_bytes(), &s).unwrap();
        assert_eq!(d.factor_levels[0], vec!["b".to_string(), "a".into()]);
        assert_eq!(d.records[3].cluster_labels[0], None);
        let sm = d.summary();
        assert_eq!((sm.observations, sm.events, sm.right_censored, sm.t_max), (4, 3, 1, 4.0));
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        let d = Dataset::new(
            vec![SurvivalRecord {
                entry_time: 0.5,
                time: 2.0,
                upper_time: Some(3.25),
                status: IntervalCensored,
                covariates: vec![0.1],
                cluster_labels: vec![Some("s1".into())],
                id: Some("7".into()),
            }],
            vec!["x".into()],
            vec!["site".into()],
        )
        .unwrap();
        d.write_csv(&mut buf).unwrap();
        let s = Schema {
            entry: Some("entry".into()),
            upper: Some("upper".into()),
            covariates: vec!["x".into()],
            factors: vec!["site".into()],
            id: Some("id".into()),
            ..Schema::new("time", "status")
        };
        let back = read_dataset(buf.as_slice(), &s).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn km_full_follow_up() {
        let d = ds((1..=3).map(|t| SurvivalRecord::simple(t as f64, Event, vec![])).collect());
        let km = kaplan_meier(&d).unwrap();
        for (s, want) in km.survival.iter().zip([2.0 / 3.0, 1.0 / 3.0, 0.0]) {
            assert!((s - want).abs() < 1e-15);
        }
    }

    #[test]
    fn km_censored_before_event() {
        let d = ds(vec![
            SurvivalRecord::simple(1.0, Event, vec![]),
            SurvivalRecord::simple(0.5, RightCensored, vec![]),
        ]);
        assert_eq!(kaplan_meier(&d).unwrap().survival, vec![0.0]);
    }

    #[test]
    fn km_delayed_entry_leaves_risk_set() {
        let late = SurvivalRecord {
            entry_time: 1.5,
            ..SurvivalRecord::simple(3.0, RightCensored, vec![])
        };
        let d = ds(vec![
            SurvivalRecord::simple(1.0, Event, vec![]),
            SurvivalRecord::simple(2.0, RightCensored, vec![]),
            late,
        ]);
        let km = kaplan_meier(&d).unwrap();
        assert_eq!(km.survival[0], 0.5);
    }

    #[test]
    fn km_ties_deaths_before_censoring() {
        let d = ds(vec![
            SurvivalRecord::simple(1.0, Event, vec![]),
            SurvivalRecord::simple(1.0, RightCensored, vec![]),
        ]);
        assert_eq!(kaplan_meier(&d).unwrap().survival, vec![0.5]);
    }

    #[test]
    fn km_rejects_interval_records() {
        let d = ds(vec![SurvivalRecord {
            upper_time: Some(2.0),
            ..SurvivalRecord::simple(1.0, IntervalCensored, vec![])
        }]);
        assert!(matches!(kaplan_meier(&d), Err(Error::UnsupportedStatus(0))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn records() -> impl Strategy<Value = Vec<SurvivalRecord>> {
            prop::collection::vec((0.0f64..2.0, 0.01f64..10.0, any::<bool>()), 1..60).prop_map(|v| {
                v.into_iter()
                    .map(|(e, d, ev)| SurvivalRecord {
                        entry_time: e,
                        ..SurvivalRecord::simple(e + d, if ev { Event } else { RightCensored }, vec![])
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn km_is_monotone_probability(recs in records()) {
                let km = kaplan_meier(&ds(recs)).unwrap();
                let mut prev = 1.0;
                for &s in &km.survival {
                    prop_assert!((0.0..=1.0).contains(&s));
                    prop_assert!(s <= prev);
                    prev = s;
                }
            }

            #[test]
            fn km_without_censoring_is_empirical(times in prop::collection::vec(0.01f64..10.0, 1..40)) {
                let n = times.len() as f64;
                let d = ds(times.iter().map(|&t| SurvivalRecord::simple(t, Event, vec![])).collect());
                let km = kaplan_meier(&d).unwrap();
                for (&t, &s) in km.times.iter().zip(&km.survival) {
                    let frac = times.iter().filter(|&&x| x > t).count() as f64 / n;
                    prop_assert!((s - frac).abs() < 1e-12);
                }
            }

            #[test]
            fn summary_counts_partition_records(recs in records()) {
                let d = ds(recs);
                let s = d.summary();
                prop_assert_eq!(s.events + s.right_censored + s.left_censored + s.interval_censored, s.observations);
            }
        }
    }
}
