//! `kgelab eval`: load a checkpoint, rank one split of a dataset, print the
//! report as one JSON line followed by a TSV table.

use kgelab::checkpoint::{check_vocab, load};
use kgelab::data::{make_queries, Dataset};
use kgelab::eval::{evaluate, EvalReport, RankingMode};

use crate::{EvalArgs, Failure, ModeArg, SplitArg};

pub fn run(args: &EvalArgs) -> crate::CmdResult {
    let (params, header) = load(&args.checkpoint).map_err(Failure::from)?;
    let data = Dataset::load(&args.dataset).map_err(Failure::from)?;
    check_vocab(&header, data.n_entities(), data.n_relations()).map_err(Failure::from)?;

    let triples = match args.split {
        SplitArg::Train => &data.train,
        SplitArg::Valid => &data.valid,
        SplitArg::Test => &data.test,
    };
    if triples.is_empty() {
        return Err(Failure::Data(format!(
            "split {:?} of {} is empty",
            args.split,
            args.dataset.display()
        )));
    }
    let mode = match args.mode {
        ModeArg::Filtered => RankingMode::Filtered,
        ModeArg::Raw => RankingMode::Raw,
    };
    let filter = kgelab::data::FilterIndex::build(&[&data.train, &data.valid, &data.test]);
    let report = evaluate(&params, &make_queries(triples), &filter, mode);

    let json = serde_json::to_string(&report)
        .map_err(|e| Failure::Data(format!("cannot serialize report: {e}")))?;
    println!("{json}");
    println!("{}", EvalReport::TSV_HEADER);
    println!("{}", report.tsv_row());
    Ok(())
}
