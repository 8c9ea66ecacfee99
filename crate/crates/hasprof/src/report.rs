//! Cross-validation reports as JSON and as aligned text.

use std::fmt::Write;

use hasprof_core::eval::{CvReport, RuntimeStats};
use serde_json::{json, Map, Value};

pub fn runtime_json(r: &RuntimeStats) -> Value {
    json!({
        "repetitions": r.repetitions,
        "train_mean_s": r.train_mean_s,
        "train_std_s": r.train_std_s,
        "predict_per_1000_mean_s": r.predict_per_1000_mean_s,
        "predict_per_1000_std_s": r.predict_per_1000_std_s,
    })
}

/// JSON form of a report. Keys come out sorted, so equal reports serialize
/// to equal bytes.
pub fn report_json(r: &CvReport) -> Value {
    let c = &r.confusion;
    let counts: Vec<Vec<u64>> = (0..c.n_classes()).map(|i| c.row(i).to_vec()).collect();
    let recall: Vec<Value> = (0..c.n_classes()).map(|i| c.recall(i).map_or(Value::Null, Value::from)).collect();
    let per_scenario = r.per_scenario.as_ref().map(|m| {
        let mut out = Map::new();
        for (name, s) in m {
            out.insert(name.clone(), json!({ "correct": s.correct, "total": s.total, "accuracy": s.accuracy() }));
        }
        Value::Object(out)
    });
    json!({
        "k": r.k,
        "seed": r.seed,
        "accuracy": r.accuracy,
        "fold_sizes": r.fold_sizes,
        "fold_accuracy": r.fold_accuracy,
        "confusion": {
            "classes": c.class_names(),
            "counts": counts,
            "row_percent": c.row_percentages(),
            "recall": recall,
        },
        "per_scenario": per_scenario,
        "warnings": r.warnings,
        "runtime": r.runtime.as_ref().map(runtime_json),
    })
}

pub fn report_json_string(r: &CvReport) -> String {
    let mut s = serde_json::to_string_pretty(&report_json(r)).expect("report serializes");
    s.push('\n');
    s
}

pub fn runtime_text(r: &RuntimeStats) -> String {
    format!(
        "runtime over {} repetitions (mean ± std)\n  train:            {:.4} ± {:.4} s\n  predict per 1000: {:.4} ± {:.4} s\n",
        r.repetitions, r.train_mean_s, r.train_std_s, r.predict_per_1000_mean_s, r.predict_per_1000_std_s
    )
}

pub fn report_text(r: &CvReport) -> String {
    let mut s = String::new();
    let n: usize = r.fold_sizes.iter().sum();
    let _ = writeln!(s, "{}-fold cross-validation, seed {}, {} samples", r.k, r.seed, n);
    let _ = writeln!(s, "accuracy: {:.2}%", 100.0 * r.accuracy);
    let folds: Vec<String> = r.fold_accuracy.iter().map(|a| format!("{:.2}", 100.0 * a)).collect();
    let _ = writeln!(s, "per fold (%): {}", folds.join(" "));
    let _ = writeln!(s, "\nconfusion matrix (rows: true class, % of row)");
    let _ = write!(s, "{}", r.confusion);
    if let Some(m) = &r.per_scenario {
        let _ = writeln!(s, "\nper scenario");
        for (name, a) in m {
            let _ = writeln!(s, "  {name:<10} {:>7.2}%  ({}/{})", 100.0 * a.accuracy(), a.correct, a.total);
        }
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    if let Some(rt) = &r.runtime {
        s.push('\n');
        s.push_str(&runtime_text(rt));
    }
    s
}
