use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shiftfield_io::Split;
use shiftfield_metrics::{bonferroni, evaluate_case, wilcoxon_signed_rank, CaseReport};

use crate::commands::{chosen_variant, configure_jobs, open_dataset, reports_dir, select_cases};
use crate::table::Table;
use crate::{CliError, Config, Result};

pub const METRIC_NAMES: [&str; 5] = [
    "mse_brain",
    "mse_edema",
    "max_error",
    "hd95",
    "pct_nonpos_jacobian",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WilcoxonEntry {
    pub method_a: String,
    pub method_b: String,
    pub metric: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_bonferroni: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Full evaluation artifact: per-case reports per method, aggregate
/// mean/std, and Bonferroni-corrected pairwise Wilcoxon tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutput {
    pub split: String,
    pub cases: Vec<usize>,
    pub methods: Vec<String>,
    pub per_case: BTreeMap<String, Vec<CaseReport>>,
    pub aggregate: BTreeMap<String, BTreeMap<String, MeanStd>>,
    pub wilcoxon: Vec<WilcoxonEntry>,
}

fn metric_value(report: &CaseReport, metric: &str) -> f64 {
    match metric {
        "mse_brain" => report.mse_brain,
        "mse_edema" => report.mse_edema,
        "max_error" => report.max_error,
        "hd95" => report.hd95,
        "pct_nonpos_jacobian" => report.pct_nonpos_jacobian,
        other => unreachable!("unknown metric {other}"),
    }
}

/// `eval`: compares each named method directory (e.g. `init/tps`,
/// `refined/tps`) against the ground truth on the selected split.
pub fn eval(
    config: &Config,
    manifest_path: &Path,
    methods: &[String],
    split: Option<Split>,
) -> Result<EvalOutput> {
    configure_jobs(config.jobs);
    let (manifest, root) = open_dataset(manifest_path)?;
    if methods.is_empty() {
        return Err(CliError::Config("eval needs at least one --methods entry".into()));
    }
    let split = split.unwrap_or(Split::Test);
    let cases = select_cases(&manifest, Some(split));
    if cases.is_empty() {
        return Err(CliError::Config(format!("no cases in split {split:?}")));
    }

    let mut per_case: BTreeMap<String, Vec<CaseReport>> = BTreeMap::new();
    for method in methods {
        let mut reports: Vec<(usize, CaseReport)> = cases
            .par_iter()
            .map(|case| -> Result<(usize, CaseReport)> {
                let labels = shiftfield_io::read_labels(root.join(&case.labels))?;
                let variant = chosen_variant(config.seed, case.id, case.variants.len().max(1));
                if case.variants.is_empty() {
                    return Err(CliError::MissingInput(
                        root.join(format!("case_{:03}: no ground-truth fields", case.id)),
                    ));
                }
                let gt = shiftfield_io::read_field(root.join(&case.variants[variant].field))?;
                let pred_path = root
                    .join(method)
                    .join(format!("case_{:03}.sff", case.id));
                if !pred_path.exists() {
                    return Err(CliError::MissingInput(pred_path));
                }
                let pred = shiftfield_io::read_field(&pred_path)?;
                let report = evaluate_case(&pred, &gt, &labels, BTreeMap::new())?;
                Ok((case.id, report))
            })
            .collect::<Result<Vec<_>>>()?;
        reports.sort_by_key(|(id, _)| *id);
        per_case.insert(method.clone(), reports.into_iter().map(|(_, r)| r).collect());
    }

    // aggregates
    let mut aggregate = BTreeMap::new();
    for (method, reports) in &per_case {
        let mut per_metric = BTreeMap::new();
        for metric in METRIC_NAMES {
            let values: Vec<f64> = reports.iter().map(|r| metric_value(r, metric)).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            per_metric.insert(
                metric.to_string(),
                MeanStd {
                    mean,
                    std: var.sqrt(),
                },
            );
        }
        aggregate.insert(method.clone(), per_metric);
    }

    // pairwise Wilcoxon with Bonferroni over the whole declared family
    let mut wilcoxon = Vec::new();
    let n_pairs = methods.len() * (methods.len() - 1) / 2;
    let family = n_pairs * METRIC_NAMES.len();
    for i in 0..methods.len() {
        for j in (i + 1)..methods.len() {
            for metric in METRIC_NAMES {
                let a: Vec<f64> = per_case[&methods[i]]
                    .iter()
                    .map(|r| metric_value(r, metric))
                    .collect();
                let b: Vec<f64> = per_case[&methods[j]]
                    .iter()
                    .map(|r| metric_value(r, metric))
                    .collect();
                let entry = match wilcoxon_signed_rank(&a, &b) {
                    Ok(result) => WilcoxonEntry {
                        method_a: methods[i].clone(),
                        method_b: methods[j].clone(),
                        metric: metric.to_string(),
                        statistic: Some(result.statistic),
                        p_value: Some(result.p_value),
                        p_bonferroni: Some(bonferroni(result.p_value, family)),
                        error: None,
                    },
                    Err(e) => WilcoxonEntry {
                        method_a: methods[i].clone(),
                        method_b: methods[j].clone(),
                        metric: metric.to_string(),
                        statistic: None,
                        p_value: None,
                        p_bonferroni: None,
                        error: Some(e.to_string()),
                    },
                };
                wilcoxon.push(entry);
            }
        }
    }

    let output = EvalOutput {
        split: format!("{split:?}").to_lowercase(),
        cases: cases.iter().map(|c| c.id).collect(),
        methods: methods.to_vec(),
        per_case,
        aggregate,
        wilcoxon,
    };

    let reports = reports_dir(&root);
    std::fs::create_dir_all(&reports).map_err(|e| CliError::fs(&reports, e))?;
    let path = reports.join("eval.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&output)
            .map_err(|e| CliError::Config(format!("eval serialize: {e}")))?,
    )
    .map_err(|e| CliError::fs(&path, e))?;
    config.echo(&root, "eval")?;

    println!("{}", render_eval_table(&output, &root));
    Ok(output)
}

/// Table-1-style stdout summary with mean (std) cells and a Time column
/// pulled from the stage timing reports when present.
fn render_eval_table(output: &EvalOutput, root: &Path) -> String {
    let mut table = Table::new(&[
        "Method",
        "MSE brain (mm^2)",
        "MSE edema (mm^2)",
        "Max Error (mm)",
        "HD95 (mm)",
        "%|J|<=0 (%)",
        "Time (s)",
    ]);
    for method in &output.methods {
        let agg = &output.aggregate[method];
        let cell = |m: &str| format!("{:.3} ({:.3})", agg[m].mean, agg[m].std);
        table.row(vec![
            method.clone(),
            cell("mse_brain"),
            cell("mse_edema"),
            cell("max_error"),
            cell("hd95"),
            cell("pct_nonpos_jacobian"),
            stage_time(root, method)
                .map(|t| format!("{t:.3}"))
                .unwrap_or_else(|| "-".into()),
        ]);
    }
    let mut out = table.render();
    out.push('\n');
    for w in &output.wilcoxon {
        match (&w.p_value, &w.error) {
            (Some(p), _) => out.push_str(&format!(
                "wilcoxon {} vs {} on {}: p = {:.4} (bonferroni {:.4})\n",
                w.method_a,
                w.method_b,
                w.metric,
                p,
                w.p_bonferroni.unwrap_or(1.0)
            )),
            (None, Some(e)) => out.push_str(&format!(
                "wilcoxon {} vs {} on {}: {}\n",
                w.method_a, w.method_b, w.metric, e
            )),
            _ => {}
        }
    }
    out
}

/// Mean per-case wall time of the pipeline stage that produced a method's
/// fields: interpolation for `init/*`, interpolation + refinement for
/// `refined/*`.
fn stage_time(root: &Path, method: &str) -> Option<f64> {
    let mean_of = |path: &Path| -> Option<f64> {
        let text = std::fs::read_to_string(path).ok()?;
        let map: BTreeMap<String, f64> = serde_json::from_str(&text).ok()?;
        if map.is_empty() {
            return None;
        }
        Some(map.values().sum::<f64>() / map.len() as f64)
    };
    let reports = reports_dir(root);
    if let Some(name) = method.strip_prefix("init/") {
        mean_of(&reports.join(format!("timings.interpolate.{name}.json")))
    } else if let Some(name) = method.strip_prefix("refined/") {
        let interp = mean_of(&reports.join(format!("timings.interpolate.{name}.json")))?;
        let refine = mean_of(&reports.join(format!("timings.refine.{name}.json")))?;
        Some(interp + refine)
    } else {
        None
    }
}
