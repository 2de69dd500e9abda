//! Synthetic fixture datasets.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

use super::{Column, ColumnData, Dataset, Target};

/// Level counts of the six categorical attributes of the monks-2 fixture.
pub const MONKS2_LEVEL_COUNTS: [usize; 6] = [3, 3, 2, 3, 4, 2];

/// Default class-mean separation of [`synth_sparse_signal`] informative
/// columns.
pub const SPARSE_SIGNAL_SHIFT: f64 = 1.0;

/// Full factorial over six categorical attributes with level counts
/// (3, 3, 2, 3, 4, 2); the binary outcome is "1" exactly when two attributes
/// take their level "2". The canonical dataset of this shape has 432 rows;
/// the level counts follow the canonical layout since only the labelling
/// rule is pinned down. The seed permutes row order.
pub fn synth_monks2(seed: u64) -> Dataset {
    let total: usize = MONKS2_LEVEL_COUNTS.iter().product();
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut stream_rng(seed, 0));

    // Row r of the factorial, attribute a: mixed-radix digit of r.
    let digit = |row: usize, attr: usize| -> usize {
        let mut r = row;
        for a in (attr + 1)..MONKS2_LEVEL_COUNTS.len() {
            r /= MONKS2_LEVEL_COUNTS[a];
        }
        r % MONKS2_LEVEL_COUNTS[attr]
    };

    let columns = (0..MONKS2_LEVEL_COUNTS.len())
        .map(|attr| {
            let levels: Vec<String> = (1..=MONKS2_LEVEL_COUNTS[attr])
                .map(|l| l.to_string())
                .collect();
            let codes: Vec<u32> = order.iter().map(|&row| digit(row, attr) as u32).collect();
            Column {
                name: format!("attr{}", attr + 1),
                data: ColumnData::Categorical { levels, codes },
            }
        })
        .collect();

    let codes: Vec<u32> = order
        .iter()
        .map(|&row| {
            let twos = (0..MONKS2_LEVEL_COUNTS.len())
                .filter(|&attr| digit(row, attr) == 1) // level "2" is digit 1
                .count();
            u32::from(twos == 2)
        })
        .collect();

    Dataset::new(
        "monks2",
        columns,
        "class",
        Target::Classification {
            classes: vec!["0".into(), "1".into()],
            codes,
        },
    )
    .expect("factorial fixture is always valid")
}

/// Binary classification with `informative` class-shifted normal columns and
/// `noise` columns independent of the label, using the default shift.
pub fn synth_sparse_signal(
    n: usize,
    informative: usize,
    noise: usize,
    seed: u64,
) -> Result<Dataset> {
    synth_sparse_signal_with_shift(n, informative, noise, SPARSE_SIGNAL_SHIFT, seed)
}

/// As [`synth_sparse_signal`] with an explicit class-mean separation: an
/// informative column is N(+shift/2, 1) under class "1" and N(-shift/2, 1)
/// under class "0". Column draws use per-column streams, so adding columns
/// does not change existing ones.
pub fn synth_sparse_signal_with_shift(
    n: usize,
    informative: usize,
    noise: usize,
    shift: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidDataset(format!(
            "sparse signal fixture needs at least 2 rows, got {n}"
        )));
    }
    if informative == 0 {
        return Err(Error::InvalidDataset(
            "sparse signal fixture needs at least one informative column".into(),
        ));
    }

    let mut label_rng = stream_rng(seed, 0);
    let labels: Vec<u32> = (0..n).map(|_| u32::from(label_rng.gen_bool(0.5))).collect();

    let mut columns = Vec::with_capacity(informative + noise);
    for j in 0..informative {
        let mut rng = stream_rng(seed, 1 + j as u64);
        let values: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let base: f64 = rng.sample(StandardNormal);
                base + if y == 1 { shift / 2.0 } else { -shift / 2.0 }
            })
            .collect();
        columns.push(Column {
            name: format!("inf{}", j + 1),
            data: ColumnData::Numeric(values),
        });
    }
    for j in 0..noise {
        let mut rng = stream_rng(seed, 1 + (informative + j) as u64);
        let values: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        columns.push(Column {
            name: format!("noise{}", j + 1),
            data: ColumnData::Numeric(values),
        });
    }

    Dataset::new(
        "sparse_signal",
        columns,
        "y",
        Target::Classification {
            classes: vec!["0".into(), "1".into()],
            codes: labels,
        },
    )
}
