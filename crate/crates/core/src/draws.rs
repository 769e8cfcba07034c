//! Constrained posterior draws with sampler statistics.

use std::io::{Read, Write};

use crate::error::{Error, Result};

const STAT_COLUMNS: [&str; 7] = [
    "chain__",
    "lp__",
    "accept_stat__",
    "stepsize__",
    "treedepth__",
    "n_leapfrog__",
    "divergent__",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    /// One row per retained draw, chains stacked in order.
    pub values: Vec<Vec<f64>>,
    pub chain: Vec<usize>,
    pub lp: Vec<f64>,
    pub accept_stat: Vec<f64>,
    pub stepsize: Vec<f64>,
    pub treedepth: Vec<usize>,
    pub n_leapfrog: Vec<usize>,
    pub divergent: Vec<bool>,
    pub new_cluster_names: Vec<String>,
    pub new_cluster: Vec<Vec<f64>>,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.values.len()
    }

    pub fn n_chains(&self) -> usize {
        self.chain.iter().max().map_or(0, |c| c + 1)
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.index(name).map(|k| self.values.iter().map(|r| r[k]).collect())
    }

    /// Draws of column `k` split by chain.
    pub fn by_chain(&self, k: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.n_chains()];
        for (row, &c) in self.values.iter().zip(&self.chain) {
            out[c].push(row[k]);
        }
        out
    }

    pub fn divergent_fraction(&self) -> f64 {
        if self.divergent.is_empty() {
            return 0.0;
        }
        self.divergent.iter().filter(|&&d| d).count() as f64 / self.divergent.len() as f64
    }

    /// New-cluster draws for row `s`, if any were stored.
    pub fn new_cluster_row(&self, s: usize) -> Option<&[f64]> {
        self.new_cluster.get(s).map(|v| v.as_slice()).filter(|v| !v.is_empty())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let header: Vec<&str> = STAT_COLUMNS
            .iter()
            .copied()
            .chain(self.names.iter().map(String::as_str))
            .chain(self.new_cluster_names.iter().map(String::as_str))
            .collect();
        wr.write_record(&header)?;
        for s in 0..self.n_draws() {
            let mut rec = vec![
                self.chain[s].to_string(),
                fmt(self.lp[s]),
                fmt(self.accept_stat[s]),
                fmt(self.stepsize[s]),
                self.treedepth[s].to_string(),
                self.n_leapfrog[s].to_string(),
                u8::from(self.divergent[s]).to_string(),
            ];
            rec.extend(self.values[s].iter().map(|&v| fmt(v)));
            if let Some(nc) = self.new_cluster.get(s) {
                rec.extend(nc.iter().map(|&v| fmt(v)));
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
        for (i, c) in STAT_COLUMNS.iter().enumerate() {
            if header.get(i).map(String::as_str) != Some(*c) {
                return Err(Error::MissingColumn((*c).into()));
            }
        }
        let rest = &header[STAT_COLUMNS.len()..];
        let n_new = rest.iter().filter(|n| n.starts_with("b_new[")).count();
        let n_par = rest.len() - n_new;
        let mut d = PosteriorDraws {
            names: rest[..n_par].to_vec(),
            new_cluster_names: rest[n_par..].to_vec(),
            ..Default::default()
        };
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                let s = rec.get(i).unwrap_or("");
                s.trim().parse::<f64>().map_err(|e| Error::ParseFailure {
                    row: row + 1,
                    column: header[i].clone(),
                    message: e.to_string(),
                })
            };
            d.chain.push(num(0)? as usize);
            d.lp.push(num(1)?);
            d.accept_stat.push(num(2)?);
            d.stepsize.push(num(3)?);
            d.treedepth.push(num(4)? as usize);
            d.n_leapfrog.push(num(5)? as usize);
            d.divergent.push(num(6)? != 0.0);
            let base = STAT_COLUMNS.len();
            d.values.push((0..n_par).map(|k| num(base + k)).collect::<Result<_>>()?);
            d.new_cluster
                .push((0..n_new).map(|k| num(base + n_par + k)).collect::<Result<_>>()?);
        }
        Ok(d)
    }
}

fn fmt(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PosteriorDraws {
        PosteriorDraws {
            names: vec!["(Intercept)".into(), "trt".into()],
            values: vec![vec![-2.1, 0.3], vec![-2.0, 1.0 / 3.0], vec![-1.9, 0.25]],
            chain: vec![0, 0, 1],
            lp: vec![-10.0, -11.5, -9.25],
            accept_stat: vec![0.9, 1.0, 0.8],
            stepsize: vec![0.5, 0.5, 0.4],
            treedepth: vec![2, 3, 2],
            n_leapfrog: vec![3, 7, 3],
            divergent: vec![false, true, false],
            new_cluster_names: vec!["b_new[(Intercept) site]".into()],
            new_cluster: vec![vec![0.1], vec![-0.2], vec![1e-300]],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = sample();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = PosteriorDraws::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn accessors() {
        let d = sample();
        assert_eq!(d.n_chains(), 2);
        assert_eq!(d.column("trt").unwrap()[2], 0.25);
        assert_eq!(d.by_chain(0), vec![vec![-2.1, -2.0], vec![-1.9]]);
        assert!((d.divergent_fraction() - 1.0 / 3.0).abs() < 1e-15);
        assert!(d.column("missing").is_none());
    }

    #[test]
    fn rejects_foreign_header() {
        let csv = "a,b\n1,2\n";
        assert!(matches!(
            PosteriorDraws::read_csv(csv.as_bytes()),
            Err(Error::MissingColumn(_))
        ));
    }
}
