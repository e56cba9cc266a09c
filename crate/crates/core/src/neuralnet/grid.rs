use std::fmt::Write as _;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::init::init_params;
use super::train::train;
use super::{ModelConfig, NetError};
use crate::pipeline::SupervisedSample;

/// Value lists to cross. An empty list keeps the template's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub epochs: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub no_units: Vec<usize>,
    pub dropout_rate: Vec<f64>,
}

impl GridSpec {
    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
            && self.batch_size.is_empty()
            && self.learning_rate.is_empty()
            && self.no_units.is_empty()
            && self.dropout_rate.is_empty()
    }

    /// Cross product in row-major order (epochs varies slowest).
    pub fn cells(&self, template: &ModelConfig) -> Vec<ModelConfig> {
        fn or<T: Clone>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() {
                vec![d]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for e in or(&self.epochs, template.epochs) {
            for b in or(&self.batch_size, template.batch_size) {
                for lr in or(&self.learning_rate, template.optimizer.learning_rate) {
                    for u in or(&self.no_units, template.no_units) {
                        for d in or(&self.dropout_rate, template.dropout_rate) {
                            let mut c = template.clone();
                            c.epochs = e;
                            c.batch_size = b;
                            c.optimizer.learning_rate = lr;
                            c.no_units = u;
                            c.dropout_rate = d;
                            out.push(c);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    /// Position in the cross product.
    pub cell: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub no_units: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    pub val_loss: Option<f64>,
    pub val_mae: Option<f64>,
    pub error: Option<String>,
}

impl GridRow {
    pub fn csv_header() -> &'static str {
        "cell,epochs,batch_size,learning_rate,no_units,dropout_rate,seed,val_loss,val_mae,error"
    }

    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            self.cell,
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.no_units,
            self.dropout_rate,
            self.seed,
            opt(self.val_loss),
            opt(self.val_mae),
            self.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
        );
        s
    }
}

/// Seed for cell `idx`. Cell 0 uses the base seed.
pub fn cell_seed(seed: u64, idx: usize) -> u64 {
    seed.wrapping_add((idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_cell(
    idx: usize,
    config: &ModelConfig,
    train_set: &[SupervisedSample],
    validation_set: &[SupervisedSample],
    seed: u64,
) -> GridRow {
    let seed = cell_seed(seed, idx);
    let outcome = init_params(config, seed)
        .and_then(|p| train(config, p, train_set, validation_set, seed));
    let (val_loss, val_mae, error) = match outcome {
        Ok((_, h)) => match h.last() {
            Some(e) => (Some(e.val_loss), Some(e.val_mae), None),
            None => (None, None, Some("no epochs run".to_string())),
        },
        Err(e) => (None, None, Some(e.to_string())),
    };
    if let Some(e) = &error {
        log::warn!("grid cell {idx} failed: {e}");
    }
    GridRow {
        cell: idx,
        epochs: config.epochs,
        batch_size: config.batch_size,
        learning_rate: config.optimizer.learning_rate,
        no_units: config.no_units,
        dropout_rate: config.dropout_rate,
        seed,
        val_loss,
        val_mae,
        error,
    }
}

/// Trains every cell of the grid and ranks them by final validation loss.
///
/// Cells are independent, so up to `jobs` of them run at once; the table
/// does not depend on `jobs`. Failed cells are kept and sorted last.
pub fn grid_search(
    template: &ModelConfig,
    grid: &GridSpec,
    train_set: &[SupervisedSample],
    validation_set: &[SupervisedSample],
    seed: u64,
    jobs: usize,
) -> Result<Vec<GridRow>, NetError> {
    if grid.is_empty() {
        return Err(NetError::Empty("grid"));
    }
    let cells = grid.cells(template);
    let jobs = jobs.clamp(1, cells.len());
    let next = Mutex::new(0usize);
    let results = Mutex::new(Vec::with_capacity(cells.len()));
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let idx = {
                    let mut n = next.lock().expect("grid queue");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(cfg) = cells.get(idx) else { break };
                let row = run_cell(idx, cfg, train_set, validation_set, seed);
                results.lock().expect("grid results").push(row);
            });
        }
    });
    let mut rows = results.into_inner().expect("grid results");
    rows.sort_by(|a, b| match (a.val_loss, b.val_loss) {
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.cell.cmp(&b.cell)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cell.cmp(&b.cell),
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use ndarray::Array2;

    fn cfg() -> ModelConfig {
        ModelConfig {
            sequence_length: 3,
            no_features: 1,
            no_units: 2,
            no_layers: 1,
            batch_size: 4,
            epochs: 2,
            ..Default::default()
        }
    }

    fn samples(n: usize) -> Vec<SupervisedSample> {
        let d = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        (0..n)
            .map(|i| SupervisedSample {
                window: Array2::from_shape_fn((3, 1), |(t, _)| ((i + t) as f64 * 0.4).sin() * 0.4 + 0.5),
                target: ((i + 3) as f64 * 0.4).sin() * 0.4 + 0.5,
                window_end_date: d,
                target_date: d,
                current_price: 1.0,
                actual_future_price: 1.0,
            })
            .collect()
    }

    #[test]
    fn single_cell_matches_direct_training() {
        let c = cfg();
        let s = samples(12);
        let grid = GridSpec { epochs: vec![2], ..Default::default() };
        let rows = grid_search(&c, &grid, &s[..9], &s[9..], 17, 1).unwrap();
        assert_eq!(rows.len(), 1);
        let p = init_params(&c, 17).unwrap();
        let (_, h) = train(&c, p, &s[..9], &s[9..], 17).unwrap();
        assert_eq!(rows[0].val_loss, Some(h.last().unwrap().val_loss));
        assert_eq!(rows[0].seed, 17);
    }

    #[test]
    fn two_by_two_sorted_and_reproducible() {
        let c = cfg();
        let s = samples(12);
        let grid = GridSpec {
            epochs: vec![1, 3],
            no_units: vec![2, 3],
            ..Default::default()
        };
        let a = grid_search(&c, &grid, &s[..9], &s[9..], 3, 1).unwrap();
        let b = grid_search(&c, &grid, &s[..9], &s[9..], 3, 4).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].val_loss.unwrap() <= w[1].val_loss.unwrap()));
        let mut cells: Vec<_> = a.iter().map(|r| r.cell).collect();
        cells.sort();
        assert_eq!(cells, vec![0, 1, 2, 3]);
    }

    #[test]
    fn failed_cell_recorded_last() {
        let c = cfg();
        let s = samples(12);
        let grid = GridSpec { dropout_rate: vec![1.5, 0.1], ..Default::default() };
        let rows = grid_search(&c, &grid, &s[..9], &s[9..], 3, 2).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.as_deref().unwrap().contains("dropout_rate"));
        assert!(rows[1].to_csv_line().starts_with("0,2,4,"));
    }

    #[test]
    fn empty_grid_rejected() {
        let s = samples(6);
        assert!(grid_search(&cfg(), &GridSpec::default(), &s, &s, 0, 1).is_err());
    }
}
