//! Results rows (one metric value per run) and the win-count table derived
//! from them.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::{Method, MetricName};
use crate::error::{CliError, Result};

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub dataset: String,
    pub method: String,
    pub metric: String,
    pub params: String,
    pub value: f64,
    pub seed: u64,
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Values closer than this count as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Per metric, how many datasets each method won. Ties credit every winner,
/// so a column can sum to more than the number of datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct WinTable {
    pub methods: Vec<Method>,
    pub metrics: Vec<MetricName>,
    /// `None` where the method never reported the metric.
    pub wins: BTreeMap<(Method, MetricName), Option<usize>>,
    pub datasets: usize,
}

impl WinTable {
    /// Averages each (dataset, method, metric) over repetitions and counts
    /// the best method per (dataset, metric).
    pub fn from_rows(rows: &[ResultRow], methods: &[Method], metrics: &[MetricName]) -> Result<Self> {
        let mut sums: BTreeMap<(String, MetricName, Method), (f64, usize)> = BTreeMap::new();
        for r in rows {
            let method = Method::parse(&r.method).ok_or_else(|| CliError::Config(format!("unknown method `{}`", r.method)))?;
            let metric = MetricName::parse(&r.metric).ok_or_else(|| CliError::Config(format!("unknown metric `{}`", r.metric)))?;
            let e = sums.entry((r.dataset.clone(), metric, method)).or_insert((0.0, 0));
            e.0 += r.value;
            e.1 += 1;
        }
        let datasets: BTreeSet<&String> = sums.keys().map(|k| &k.0).collect();
        let mut wins: BTreeMap<(Method, MetricName), Option<usize>> =
            methods.iter().flat_map(|&m| metrics.iter().map(move |&q| ((m, q), None))).collect();
        for (_, metric, method) in sums.keys() {
            if let Some(w) = wins.get_mut(&(*method, *metric)) {
                w.get_or_insert(0);
            }
        }
        for dataset in &datasets {
            for &metric in metrics {
                let means: Vec<(Method, f64)> = methods
                    .iter()
                    .filter_map(|&m| sums.get(&((*dataset).clone(), metric, m)).map(|(s, c)| (m, s / *c as f64)))
                    .collect();
                let best = means.iter().map(|&(_, v)| if metric.higher_is_better() { -v } else { v }).fold(f64::INFINITY, f64::min);
                for (m, v) in means {
                    let v = if metric.higher_is_better() { -v } else { v };
                    if v - best <= TIE_TOLERANCE {
                        *wins.get_mut(&(m, metric)).unwrap().get_or_insert(0) += 1;
                    }
                }
            }
        }
        Ok(Self { methods: methods.to_vec(), metrics: metrics.to_vec(), wins, datasets: datasets.len() })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["method".to_string()];
        header.extend(self.metrics.iter().map(|m| m.name().to_string()));
        w.write_record(&header)?;
        for &method in &self.methods {
            let mut rec = vec![method.name().to_string()];
            for &metric in &self.metrics {
                rec.push(match self.wins[&(method, metric)] {
                    Some(n) => n.to_string(),
                    None => "-".into(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dataset: &str, method: &str, metric: &str, value: f64) -> ResultRow {
        ResultRow {
            run_id: format!("{dataset}/0"),
            dataset: dataset.into(),
            method: method.into(),
            metric: metric.into(),
            params: String::new(),
            value,
            seed: 0,
        }
    }

    #[test]
    fn ties_credit_every_winner() {
        let rows = vec![
            row("a", "DT", "rmse", 0.3),
            row("a", "IR", "rmse", 0.3),
            row("a", "PS", "rmse", 0.4),
            row("b", "DT", "rmse", 0.5),
            row("b", "IR", "rmse", 0.2),
            row("b", "PS", "rmse", 0.2),
            row("a", "DT", "auc", 0.7),
            row("a", "IR", "auc", 0.9),
            row("a", "DT", "pde", 0.1),
            row("b", "DT", "pde", 0.1),
        ];
        let t = WinTable::from_rows(&rows, &Method::ALL, &[MetricName::Rmse, MetricName::Auc, MetricName::Pde]).unwrap();
        assert_eq!(t.wins[&(Method::Tree, MetricName::Rmse)], Some(1));
        assert_eq!(t.wins[&(Method::Isotonic, MetricName::Rmse)], Some(2));
        assert_eq!(t.wins[&(Method::Platt, MetricName::Rmse)], Some(1));
        // column sums exceed the dataset count under ties
        assert_eq!(t.datasets, 2);
        assert_eq!(t.wins[&(Method::Isotonic, MetricName::Auc)], Some(1));
        assert_eq!(t.wins[&(Method::Tree, MetricName::Pde)], Some(2));
        assert_eq!(t.wins[&(Method::Platt, MetricName::Pde)], None);
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "method,rmse,auc,pde\nDT,1,0,2\nIR,2,1,-\nPS,1,-,-\n");
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![row("a", "DT", "ece", 0.125)];
        let mut out = Vec::new();
        write_results(&rows, &mut out).unwrap();
        assert!(String::from_utf8(out.clone()).unwrap().starts_with("run_id,dataset,method,metric,params,value,seed\n"));
        assert_eq!(read_results(&out[..]).unwrap(), rows);
    }
}
