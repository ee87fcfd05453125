//! Output rendering. Every numeric value is serialized with 17 significant
//! digits so a round trip through text reproduces the exact f64.

use std::io::Write;

use rgtlps::estimation::FitResult;
use rgtlps::gof::GofReport;
use serde::Serialize;

use crate::data::Dataset;
use crate::OutputFormat;

/// 17 significant digits (1 leading + 16 after the point in scientific
/// notation), enough to reconstruct the bit pattern.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
struct FitOutput<'a> {
    source_path: &'a str,
    n_obs: usize,
    #[serde(flatten)]
    report: &'a GofReport,
    /// Extra diagnostics available for the compound models.
    #[serde(skip_serializing_if = "Option::is_none")]
    compound: Option<&'a FitResult>,
}

pub fn write_fit(
    format: OutputFormat,
    dataset: &Dataset,
    report: &GofReport,
    compound: Option<&FitResult>,
) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    match format {
        OutputFormat::Json => {
            let payload = FitOutput {
                source_path: &dataset.source_path,
                n_obs: dataset.n(),
                report,
                compound,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&payload).expect("serializable"))
        }
        OutputFormat::Tsv => {
            writeln!(out, "model\t{}", report.model_name)?;
            writeln!(out, "source\t{}", dataset.source_path)?;
            writeln!(out, "n_obs\t{}", dataset.n())?;
            writeln!(out, "k\t{}", report.k)?;
            writeln!(out, "converged\t{}", report.converged)?;
            for p in &report.params {
                let se = p.std_error.map(|s| fmt17(s)).unwrap_or_else(|| "NA".into());
                writeln!(out, "param\t{}\t{}\t{}", p.name, fmt17(p.value), se)?;
            }
            writeln!(out, "loglik\t{}", fmt17(report.loglik))?;
            writeln!(out, "aic\t{}", fmt17(report.aic))?;
            writeln!(out, "ks_statistic\t{}", fmt17(report.ks_statistic))?;
            writeln!(out, "ks_pvalue\t{}", fmt17(report.ks_pvalue))?;
            if let Some(p) = report.ks_bootstrap_pvalue {
                writeln!(out, "ks_bootstrap_pvalue\t{}", fmt17(p))?;
            }
            if let Some(fit) = compound {
                writeln!(out, "method\t{:?}", fit.method)?;
                writeln!(out, "iterations\t{}", fit.iterations)?;
                writeln!(out, "grad_inf_norm\t{}", fmt17(fit.grad_inf_norm))?;
                writeln!(
                    out,
                    "boundary_flags\talpha={} nu={} theta={}",
                    fit.boundary_flags.alpha, fit.boundary_flags.nu, fit.boundary_flags.theta
                )?;
                if let Some(reason) = &fit.se_failure {
                    writeln!(out, "se_failure\t{reason}")?;
                }
            }
            Ok(())
        }
    }
}

pub fn write_eval_rows(format: OutputFormat, rows: &[(f64, f64)]) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    match format {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Row {
                x: f64,
                value: f64,
            }
            let payload: Vec<Row> = rows.iter().map(|&(x, value)| Row { x, value }).collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&payload).expect("serializable"))
        }
        OutputFormat::Tsv => {
            writeln!(out, "x\tvalue")?;
            for &(x, value) in rows {
                writeln!(out, "{}\t{}", fmt17(x), fmt17(value))?;
            }
            Ok(())
        }
    }
}

pub fn write_compare(
    format: OutputFormat,
    dataset: &Dataset,
    reports: &[GofReport],
) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    match format {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct ComparePayload<'a> {
                source_path: &'a str,
                n_obs: usize,
                ranking: &'a [GofReport],
            }
            let payload = ComparePayload {
                source_path: &dataset.source_path,
                n_obs: dataset.n(),
                ranking: reports,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&payload).expect("serializable"))
        }
        OutputFormat::Tsv => {
            writeln!(
                out,
                "rank\tmodel\tk\tloglik\taic\tks_statistic\tks_pvalue\tconverged\tparams"
            )?;
            for (rank, r) in reports.iter().enumerate() {
                let params = r
                    .params
                    .iter()
                    .map(|p| {
                        let se = p
                            .std_error
                            .map(|s| format!(" ({})", fmt17(s)))
                            .unwrap_or_default();
                        format!("{}={}{}", p.name, fmt17(p.value), se)
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    rank + 1,
                    r.model_name,
                    r.k,
                    fmt17(r.loglik),
                    fmt17(r.aic),
                    fmt17(r.ks_statistic),
                    fmt17(r.ks_pvalue),
                    r.converged,
                    params
                )?;
            }
            Ok(())
        }
    }
}
