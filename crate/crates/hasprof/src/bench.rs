//! Wall-clock timing of training and prediction.

use std::time::Instant;

use hasprof_core::eval::{mean_std, RuntimeStats};
use hasprof_core::learn::Learner;
use hasprof_core::{Classifier, Dataset, ModelSpec};

use crate::error::{Error, Result};

/// Rows per prediction batch.
pub const BATCH: usize = 1000;

/// Trains on the whole dataset `repetitions` times and times a batch of
/// 1000 predictions after each fit (rows are reused cyclically when the
/// dataset is smaller). Runs serially.
pub fn benchmark(spec: &ModelSpec, ds: &Dataset, repetitions: usize) -> Result<RuntimeStats> {
    if repetitions == 0 {
        return Err(Error::Invalid("benchmark needs at least one repetition".into()));
    }
    if ds.is_empty() {
        return Err(Error::Invalid("benchmark needs a non-empty dataset".into()));
    }
    let mut train = Vec::with_capacity(repetitions);
    let mut predict = Vec::with_capacity(repetitions);
    let mut sink = 0usize;
    for _ in 0..repetitions {
        let t = Instant::now();
        let model = spec.fit(ds)?;
        train.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        for i in 0..BATCH {
            sink = sink.wrapping_add(model.predict(ds.row(i % ds.n_rows()))?);
        }
        predict.push(t.elapsed().as_secs_f64());
    }
    std::hint::black_box(sink);
    let (train_mean_s, train_std_s) = mean_std(&train);
    let (predict_per_1000_mean_s, predict_per_1000_std_s) = mean_std(&predict);
    Ok(RuntimeStats { repetitions, train_mean_s, train_std_s, predict_per_1000_mean_s, predict_per_1000_std_s })
}
