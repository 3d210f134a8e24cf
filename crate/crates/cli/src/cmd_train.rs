//! `kgelab train`: resolve a configuration, run the loop, leave behind a
//! self-describing run directory:
//!
//! ```text
//! <out>/
//!   manifest.json    resolved config, seed, tool version, data checksums
//!   metrics.jsonl    one JSON object per logged step or ranking pass
//!   checkpoint.bin   final parameters
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use kgelab::data::{make_queries, Dataset, FilterIndex};
use kgelab::eval::{evaluate, EvalReport, RankingMode};
use kgelab::trainer::{preset, preset_names, train, LogRecord, TrainConfig};

use crate::manifest::{dataset_checksums, unix_now, RunManifest};
use crate::{Failure, TrainArgs};

pub fn run(args: &TrainArgs) -> crate::CmdResult {
    let (mut cfg, label) = base_config(args)?;
    apply_overrides(&mut cfg, args);
    cfg.validate().map_err(Failure::from)?;

    let Some(dataset_dir) = cfg.dataset.clone() else {
        return Err(Failure::Usage(
            "no dataset directory: pass --dataset or set `dataset` in the config".into(),
        ));
    };

    let data = Dataset::load(&dataset_dir).map_err(Failure::from)?;

    let run_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{label}-seed{}", cfg.seed)));
    if RunManifest::path_in(&run_dir).exists() {
        return Err(Failure::Data(format!(
            "{} already holds a run; pick a fresh --out",
            run_dir.display()
        )));
    }
    fs::create_dir_all(&run_dir)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", run_dir.display())))?;

    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        status: "running".into(),
        seed: cfg.seed,
        config: cfg.clone(),
        dataset_sha256: dataset_checksums(&dataset_dir)?,
        started_unix: unix_now(),
        finished_unix: None,
    };
    manifest.write(&run_dir)?;

    let metrics_path = run_dir.join("metrics.jsonl");
    let file = File::create(&metrics_path)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", metrics_path.display())))?;
    let mut metrics = BufWriter::new(file);
    let write_record = |rec: &LogRecord, sink: &mut BufWriter<File>| {
        // Flush per line so an aborted run still leaves a readable log.
        if let Ok(line) = serde_json::to_string(rec) {
            let _ = writeln!(sink, "{line}");
            let _ = sink.flush();
        }
    };

    eprintln!(
        "training {label}: {} steps on {}",
        cfg.max_steps,
        dataset_dir.display()
    );
    let outcome = match train(&cfg, &data, |rec| write_record(rec, &mut metrics)) {
        Ok(outcome) => outcome,
        Err(e) => {
            manifest.status = "aborted".into();
            manifest.finished_unix = Some(unix_now());
            manifest.write(&run_dir)?;
            return Err(Failure::from(e));
        }
    };

    let ckpt_path = run_dir.join("checkpoint.bin");
    kgelab::checkpoint::save(&ckpt_path, &outcome.params, cfg.seed).map_err(Failure::from)?;

    // Final rankings on both held-out splits, appended to the same log so the
    // run directory carries its own headline numbers. A split already logged
    // at the last step by the in-loop cadence is not logged twice.
    let filter = FilterIndex::build(&[&data.train, &data.valid, &data.test]);
    println!("split\t{}", EvalReport::TSV_HEADER);
    for (split, triples) in [("valid", &data.valid), ("test", &data.test)] {
        if triples.is_empty() {
            continue;
        }
        let report = evaluate(
            &outcome.params,
            &make_queries(triples),
            &filter,
            RankingMode::Filtered,
        );
        println!("{split}\t{}", report.tsv_row());
        let already_logged = outcome
            .log
            .iter()
            .any(|r| r.step == cfg.max_steps && r.split.as_deref() == Some(split));
        if already_logged {
            continue;
        }
        let rec = LogRecord {
            step: cfg.max_steps,
            loss: None,
            split: Some(split.to_string()),
            mrr: Some(report.mrr),
            hits1: Some(report.hits1),
            hits3: Some(report.hits3),
            hits10: Some(report.hits10),
        };
        write_record(&rec, &mut metrics);
    }
    drop(metrics);

    manifest.status = "complete".into();
    manifest.finished_unix = Some(unix_now());
    manifest.write(&run_dir)?;
    println!("run directory: {}", run_dir.display());
    Ok(())
}

/// Starting configuration plus a short label for default output paths.
fn base_config(args: &TrainArgs) -> Result<(TrainConfig, String), Failure> {
    match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
            let cfg: TrainConfig = toml::from_str(&text)
                .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "config".into());
            Ok((cfg, label))
        }
        (None, Some(name)) => match preset(name) {
            Some(cfg) => Ok((cfg, name.clone())),
            None => Err(Failure::Usage(format!(
                "unknown preset {name:?}; known presets: {}",
                preset_names().join(", ")
            ))),
        },
        (None, None) => Err(Failure::Usage(
            "pick a starting point: --preset <name> or --config <path>".into(),
        )),
        // clap's conflicts_with already rejects this pair, but keep the
        // guard so the function is total.
        (Some(_), Some(_)) => Err(Failure::Usage(
            "--config and --preset are mutually exclusive".into(),
        )),
    }
}

fn apply_overrides(cfg: &mut TrainConfig, args: &TrainArgs) {
    if let Some(m) = args.model {
        cfg.model = m.into();
    }
    if let Some(l) = args.loss {
        cfg.loss.family = l.into();
    }
    if let Some(g) = args.gamma {
        cfg.loss.gamma = g;
    }
    if let Some(nu) = args.nu {
        cfg.loss.num_negatives = nu;
    }
    if let Some(a) = args.alpha {
        cfg.loss.alpha = a;
    }
    if let Some(s) = args.subsampling {
        cfg.loss.subsampling = s.into();
    }
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    if let Some(b) = args.batch {
        cfg.batch_size = b;
    }
    if let Some(d) = args.dim {
        cfg.dim = d;
    }
    if let Some(s) = args.steps {
        cfg.max_steps = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.eval_every {
        cfg.eval_every = e;
    }
    if let Some(p) = args.p {
        cfg.p_norm = Some(p);
    }
    if let Some(d) = &args.dataset {
        cfg.dataset = Some(d.clone());
    }
}
