use std::path::PathBuf;

use focal_selfcal::formats::read_eval_records;
use focal_selfcal::metrics::summarize;

use crate::{open_input, write_output, CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Sweep CSV or JSON array of records (`-` for stdin).
    input: PathBuf,
    /// Pose mAA thresholds in degrees.
    #[arg(long, value_delimiter = ',', default_value = "10,20")]
    maa_pose: Vec<f64>,
    /// Focal mAA thresholds (relative error).
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2")]
    maa_focal: Vec<f64>,
    /// Summary CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cell(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

pub fn run(a: Args) -> CmdResult {
    let (pose, focal) = (a.maa_pose, a.maa_focal);
    if pose.iter().chain(&focal).any(|t| !(*t > 0.0)) {
        return Err(Failure::input("mAA thresholds must be positive"));
    }
    let records = read_eval_records(open_input(&a.input)?).map_err(|e| Failure::input(format!("{}: {e}", a.input.display())))?;
    if records.is_empty() {
        return Err(Failure::insufficient("no records"));
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["group".to_string(), "count".into(), "failures".into(), "median_p_err".into()];
    header.extend(pose.iter().map(|t| format!("maa_p_{t}")));
    header.push("median_f_err".into());
    header.extend(focal.iter().map(|t| format!("maa_f_{t}")));
    let csv_err = |e: csv::Error| Failure::input(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for s in summarize(&records, &pose, &focal) {
        let mut row = vec![s.group.clone(), s.count.to_string(), s.failures.to_string(), cell(s.median_p_err)];
        if s.maa_p.is_empty() {
            row.extend(pose.iter().map(|_| String::new()));
        } else {
            row.extend(s.maa_p.iter().map(|(_, v)| v.to_string()));
        }
        row.push(cell(s.median_f_err));
        row.extend(s.maa_f.iter().map(|(_, v)| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::input(e.to_string()))?;
    write_output(a.out.as_ref(), &bytes)
}
