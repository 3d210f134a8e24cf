//! `kgelab freq`: dump the frequency-based instance weights for every
//! training triple as JSON lines, one object per triple, with both query
//! directions and both the normalized and split-size-rescaled forms.

use serde::Serialize;

use kgelab::data::{Dataset, Direction, FrequencyTable, Query, Triple};
use kgelab::loss::SubsamplingMethod;
use kgelab::subsample::SubsampleTable;

use crate::{Failure, FreqArgs};

/// Weights of one query direction: `a` scales the positive term, `b` the
/// negative term; the `_rescaled` pair is multiplied by the split size so
/// weights average 1 across the split.
#[derive(Serialize)]
struct DirectionWeights {
    a: f64,
    b: f64,
    a_rescaled: f64,
    b_rescaled: f64,
}

#[derive(Serialize)]
struct TripleWeights<'a> {
    head: &'a str,
    relation: &'a str,
    tail: &'a str,
    tail_query: DirectionWeights,
    head_query: DirectionWeights,
}

pub fn run(args: &FreqArgs) -> crate::CmdResult {
    let method: SubsamplingMethod = args.method.into();
    if method == SubsamplingMethod::None {
        return Err(Failure::Usage(
            "method `none` has no weights to dump; pick base, freq or uniq".into(),
        ));
    }
    let data = Dataset::load(&args.dataset).map_err(Failure::from)?;
    let freq = FrequencyTable::count_frequencies(&data.train);
    let table = SubsampleTable::build(method, &data.train, &freq);

    let weights_for = |t: &Triple, direction: Direction| -> DirectionWeights {
        let q = match direction {
            Direction::TailPrediction => Query {
                direction,
                anchor: t.head,
                relation: t.relation,
                answer: t.tail,
            },
            Direction::HeadPrediction => Query {
                direction,
                anchor: t.tail,
                relation: t.relation,
                answer: t.head,
            },
        };
        let (a, b) = table.weights(&q, &freq);
        let (a_rescaled, b_rescaled) = table.weights_rescaled(&q, &freq);
        DirectionWeights {
            a,
            b,
            a_rescaled,
            b_rescaled,
        }
    };

    let mut out = std::io::stdout().lock();
    for t in &data.train {
        let (head, relation, tail) = data.vocab.decode(t);
        let row = TripleWeights {
            head,
            relation,
            tail,
            tail_query: weights_for(t, Direction::TailPrediction),
            head_query: weights_for(t, Direction::HeadPrediction),
        };
        let line = serde_json::to_string(&row)
            .map_err(|e| Failure::Data(format!("cannot serialize weights: {e}")))?;
        use std::io::Write;
        if let Err(e) = writeln!(out, "{line}") {
            // A closed pipe (e.g. piping into `head`) ends the dump cleanly.
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                return Ok(());
            }
            return Err(Failure::Data(format!("cannot write to stdout: {e}")));
        }
    }
    Ok(())
}
