use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Result};
use crate::metrics::MeasureRecord;

/// Means of the four measures over a group; missing values are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Means {
    pub n: usize,
    pub rmse: Option<f64>,
    pub q: Option<f64>,
    pub kappa: Option<f64>,
    pub oa: Option<f64>,
}

impl Means {
    fn of<'a>(records: impl Iterator<Item = &'a MeasureRecord> + Clone) -> Self {
        let mean = |f: fn(&MeasureRecord) -> Option<f64>| {
            let (sum, count) = records
                .clone()
                .filter_map(f)
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            (count > 0).then(|| sum / count as f64)
        };
        Self {
            n: records.clone().count(),
            rmse: mean(|r| r.rmse),
            q: mean(|r| r.q),
            kappa: mean(|r| r.kappa),
            oa: mean(|r| r.oa),
        }
    }
}

/// One grouped table: key column names, then one row of key values and means
/// per group in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTable {
    pub keys: Vec<&'static str>,
    pub rows: Vec<(Vec<String>, Means)>,
}

impl GroupTable {
    fn build(
        records: &[MeasureRecord],
        keys: Vec<&'static str>,
        key_of: impl Fn(&MeasureRecord) -> Vec<String>,
    ) -> Self {
        let mut groups: Vec<Vec<String>> = Vec::new();
        for r in records {
            let k = key_of(r);
            if !groups.contains(&k) {
                groups.push(k);
            }
        }
        let rows = groups
            .into_iter()
            .map(|k| {
                let means = Means::of(records.iter().filter(|r| key_of(r) == k));
                (k, means)
            })
            .collect();
        Self { keys, rows }
    }

    pub fn get(&self, key: &[&str]) -> Option<&Means> {
        self.rows
            .iter()
            .find(|(k, _)| k.iter().map(String::as_str).eq(key.iter().copied()))
            .map(|(_, m)| m)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{},n,rmse,q,kappa,oa", self.keys.join(","));
        let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for (k, m) in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                k.join(","),
                m.n,
                f(m.rmse),
                f(m.q),
                f(m.kappa),
                f(m.oa)
            );
        }
        out
    }
}

/// Mean profiles (method × image), per-method, per-RRM and method × RRM means.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean_profile: GroupTable,
    pub by_method: GroupTable,
    pub by_rrm: GroupTable,
    pub by_method_rrm: GroupTable,
}

pub fn summarize(records: &[MeasureRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(invalid("cannot summarize an empty table"));
    }
    Ok(Summary {
        mean_profile: GroupTable::build(records, vec!["method", "image"], |r| {
            vec![r.method.clone(), r.image.to_string()]
        }),
        by_method: GroupTable::build(records, vec!["method"], |r| vec![r.method.clone()]),
        by_rrm: GroupTable::build(records, vec!["rrm"], |r| vec![r.rrm.to_string()]),
        by_method_rrm: GroupTable::build(records, vec!["method", "rrm"], |r| {
            vec![r.method.clone(), r.rrm.to_string()]
        }),
    })
}

impl Summary {
    pub const FILES: [&'static str; 4] = [
        "mean_profile.csv",
        "method_means.csv",
        "rrm_means.csv",
        "method_rrm_means.csv",
    ];

    /// Writes the four summary CSVs into `dir` and returns their paths.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let tables = [
            &self.mean_profile,
            &self.by_method,
            &self.by_rrm,
            &self.by_method_rrm,
        ];
        let mut paths = Vec::new();
        for (name, table) in Self::FILES.iter().zip(tables) {
            let path = dir.join(name);
            fs::write(&path, table.to_csv_string())?;
            paths.push(path);
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::EvalRegion;

    fn rec(method: &str, rrm: u8, image: usize, rmse: f64, q: Option<f64>) -> MeasureRecord {
        MeasureRecord {
            method: method.into(),
            rrm,
            image,
            subimage: 0,
            region: EvalRegion::Gap,
            rmse: Some(rmse),
            q,
            kappa: Some(0.5),
            oa: Some(0.75),
        }
    }

    #[test]
    fn single_record_passes_through() {
        let r = rec("B", 0, 0, 18.09, Some(0.85));
        let s = summarize(std::slice::from_ref(&r)).unwrap();
        for table in [&s.mean_profile, &s.by_method, &s.by_rrm, &s.by_method_rrm] {
            let m = &table.rows[0].1;
            assert_eq!(
                (m.n, m.rmse, m.q, m.kappa, m.oa),
                (1, r.rmse, r.q, r.kappa, r.oa)
            );
        }
    }

    #[test]
    fn arithmetic_means_skip_missing() {
        let records = vec![
            rec("A1", 0, 0, 10.0, Some(0.5)),
            rec("A1", 2, 1, 20.0, None),
            rec("B", 0, 0, 4.0, Some(0.9)),
        ];
        let s = summarize(&records).unwrap();
        let a1 = s.by_method.get(&["A1"]).unwrap();
        assert_eq!((a1.n, a1.rmse, a1.q), (2, Some(15.0), Some(0.5)));
        let r0 = s.by_rrm.get(&["0"]).unwrap();
        assert_eq!(r0.rmse, Some(7.0));
        assert!((r0.q.unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(s.by_rrm.get(&["2"]).unwrap().q, None);
        assert_eq!(s.mean_profile.rows.len(), 3);
        assert!(s
            .by_method
            .to_csv_string()
            .starts_with("method,n,rmse,q,kappa,oa\nA1,2,15,0.5,0.5,0.75\n"));
        assert!(summarize(&[]).is_err());
    }
}
