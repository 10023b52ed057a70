//! The command-line workflow driven in-process: simulate a series, fit it,
//! then re-summarize the saved draws at the 90% level.
//!
//!     cargo run --release --example cli_workflow

use nbbtf::cli::run_from;

fn main() {
    let dir = std::env::temp_dir().join("nbbtf-cli-workflow");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let data = dir.join("series.csv");
    let fit = dir.join("fit");
    let s90 = dir.join("summary90.csv");
    let p = |x: &std::path::Path| x.to_string_lossy().into_owned();

    let steps: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--T".into(), "200".into(), "--r".into(), "10".into(), "--out".into(), p(&data)],
        vec![
            "fit".into(), "--input".into(), p(&data), "--out".into(), p(&fit),
            "--iterations".into(), "6000".into(), "--burnin".into(), "5000".into(),
        ],
        vec!["summarize".into(), "--draws".into(), p(&fit.join("draws.bin")), "--level".into(), "0.9".into(), "--out".into(), p(&s90)],
    ];
    for args in steps {
        let code = run_from(std::iter::once("nbbtf".to_string()).chain(args.clone()));
        println!("nbbtf {} -> exit {code}", args[0]);
        if code != 0 {
            std::process::exit(i32::from(code));
        }
    }
    let report = std::fs::read_to_string(fit.join("report.json")).expect("report");
    println!("{report}");
    println!("outputs in {}", dir.display());
}
