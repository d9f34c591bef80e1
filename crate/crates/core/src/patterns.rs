//! Training glyphs and seeded noisy test sets.

use crate::error::{Error, Result};
use crate::topology::NetworkScale;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Square binary image, row-major, `true` = black.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryImage {
    side: usize,
    pixels: Vec<bool>,
}

impl BinaryImage {
    pub fn new(side: usize, pixels: Vec<bool>) -> Result<Self> {
        if pixels.len() != side * side {
            return Err(Error::ShapeMismatch {
                expected: side * side,
                got: pixels.len(),
            });
        }
        Ok(BinaryImage { side, pixels })
    }

    /// From 0/1 values (1 = black); anything else is rejected.
    pub fn from_values(side: usize, values: &[u8]) -> Result<Self> {
        let pixels = values
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::NonBinaryImage(other, i)),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(side, pixels)
    }

    /// From rows of `#` (black) and `.` (white).
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let side = rows.len();
        let mut pixels = Vec::with_capacity(side * side);
        for row in rows {
            let row = row.as_ref();
            if row.chars().count() != side {
                return Err(Error::PatternFile(format!(
                    "row `{row}` has {} characters, expected {side}",
                    row.chars().count()
                )));
            }
            for ch in row.chars() {
                match ch {
                    '#' => pixels.push(true),
                    '.' => pixels.push(false),
                    other => {
                        return Err(Error::PatternFile(format!(
                            "unexpected character `{other}`"
                        )))
                    }
                }
            }
        }
        Self::new(side, pixels)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn black_count(&self) -> usize {
        self.pixels.iter().filter(|&&b| b).count()
    }

    pub fn hamming(&self, other: &BinaryImage) -> usize {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Black pixels of `self` that are white in `other`.
    pub fn exclusive_black(&self, other: &BinaryImage) -> usize {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .filter(|(&a, &b)| a && !b)
            .count()
    }

    pub fn rows(&self) -> Vec<String> {
        self.pixels
            .chunks(self.side)
            .map(|r| r.iter().map(|&b| if b { '#' } else { '.' }).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestItem {
    pub image: BinaryImage,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub scale: NetworkScale,
    pub train_patterns: Vec<BinaryImage>,
    pub test_items: Vec<TestItem>,
    pub flip_prob: f64,
    pub seed: u64,
}

impl PatternSet {
    /// Built-in glyphs plus a noisy test set.
    pub fn generate(
        scale: NetworkScale,
        flip_prob: f64,
        n_per_category: usize,
        seed: u64,
    ) -> Result<Self> {
        let train = generate_glyphs(scale)?;
        Self::from_training(scale, train, flip_prob, n_per_category, seed)
    }

    pub fn from_training(
        scale: NetworkScale,
        train_patterns: Vec<BinaryImage>,
        flip_prob: f64,
        n_per_category: usize,
        seed: u64,
    ) -> Result<Self> {
        scale.validate()?;
        if train_patterns.len() != scale.categories_c {
            return Err(Error::ShapeMismatch {
                expected: scale.categories_c,
                got: train_patterns.len(),
            });
        }
        for p in &train_patterns {
            if p.side() != scale.pixels_p {
                return Err(Error::ShapeMismatch {
                    expected: scale.pixels_p,
                    got: p.side(),
                });
            }
        }
        for (i, a) in train_patterns.iter().enumerate() {
            for b in &train_patterns[i + 1..] {
                if a == b {
                    return Err(Error::PatternsIndistinct(scale.to_string()));
                }
            }
        }
        let test_items = make_testset(&train_patterns, flip_prob, n_per_category, seed)?;
        Ok(PatternSet {
            scale,
            train_patterns,
            test_items,
            flip_prob,
            seed,
        })
    }
}

/// Each glyph must keep this many black pixels that are white in every
/// other glyph, pairwise. Current-summation readout needs the margin to
/// survive a couple of flipped pixels.
pub const MIN_EXCLUSIVE_BLACK: usize = 3;

const DIGITS: [[&str; 5]; 5] = [
    [".###.", "#...#", "#...#", "#...#", ".###."],
    ["..#..", ".##..", "..#..", "..#..", ".###."],
    [".###.", "#...#", "..##.", ".#...", "#####"],
    ["####.", "....#", ".###.", "....#", "####."],
    ["#...#", "#...#", "#####", "....#", "....#"],
];

fn scale_stencil(stencil: &[&str; 5], p: usize) -> BinaryImage {
    let cells: Vec<Vec<bool>> = stencil
        .iter()
        .map(|r| r.chars().map(|c| c == '#').collect())
        .collect();
    let mut pixels = Vec::with_capacity(p * p);
    for r in 0..p {
        for c in 0..p {
            pixels.push(cells[r * 5 / p][c * 5 / p]);
        }
    }
    BinaryImage { side: p, pixels }
}

/// Horizontal bands, one per category.
fn band_glyphs(p: usize, c: usize) -> Vec<BinaryImage> {
    (0..c)
        .map(|k| {
            let lo = k * p / c;
            let hi = (k + 1) * p / c;
            let pixels = (0..p * p).map(|i| (lo..hi).contains(&(i / p))).collect();
            BinaryImage { side: p, pixels }
        })
        .collect()
}

/// Smallest pairwise exclusive-black count over ordered pairs.
pub fn min_exclusive_black(glyphs: &[BinaryImage]) -> usize {
    let mut best = usize::MAX;
    for (i, a) in glyphs.iter().enumerate() {
        for (j, b) in glyphs.iter().enumerate() {
            if i != j {
                best = best.min(a.exclusive_black(b));
            }
        }
    }
    best
}

/// Digits 0..c rasterized from 5x5 stencils by nearest-neighbour scaling.
/// Where that leaves less than [`MIN_EXCLUSIVE_BLACK`] pixels of margin
/// (e.g. at 3x3) the band set is used instead.
pub fn generate_glyphs(scale: NetworkScale) -> Result<Vec<BinaryImage>> {
    scale.validate()?;
    let (p, c) = (scale.pixels_p, scale.categories_c);
    if p < 3 {
        return Err(Error::PatternsIndistinct(scale.to_string()));
    }
    if c <= DIGITS.len() {
        let digits: Vec<BinaryImage> = DIGITS[..c].iter().map(|s| scale_stencil(s, p)).collect();
        if min_exclusive_black(&digits) >= MIN_EXCLUSIVE_BLACK {
            return Ok(digits);
        }
    }
    if c <= p {
        let bands = band_glyphs(p, c);
        if min_exclusive_black(&bands) >= MIN_EXCLUSIVE_BLACK {
            return Ok(bands);
        }
    }
    Err(Error::PatternsIndistinct(scale.to_string()))
}

/// Test items are training patterns with i.i.d. pixel flips. Item `k`
/// (category-major order) draws from ChaCha8 stream `k` under `seed`, so
/// any item can be regenerated on its own.
pub fn make_testset(
    train_patterns: &[BinaryImage],
    flip_prob: f64,
    n_per_category: usize,
    seed: u64,
) -> Result<Vec<TestItem>> {
    if !(0.0..0.5).contains(&flip_prob) {
        return Err(Error::InvalidParams(format!(
            "flip probability {flip_prob} outside [0, 0.5)"
        )));
    }
    if n_per_category == 0 {
        return Err(Error::InvalidParams(
            "need at least one test item per category".into(),
        ));
    }
    let mut items = Vec::with_capacity(train_patterns.len() * n_per_category);
    for (label, pattern) in train_patterns.iter().enumerate() {
        for j in 0..n_per_category {
            let stream = (label * n_per_category + j) as u64;
            let mask = flip_mask(pattern.pixels.len(), flip_prob, seed, stream);
            let pixels = pattern
                .pixels
                .iter()
                .zip(&mask)
                .map(|(&px, &flip)| px ^ flip)
                .collect();
            items.push(TestItem {
                image: BinaryImage {
                    side: pattern.side,
                    pixels,
                },
                label,
            });
        }
    }
    Ok(items)
}

pub fn flip_mask(len: usize, flip_prob: f64, seed: u64, stream: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..len).map(|_| rng.gen::<f64>() < flip_prob).collect()
}

/// One block of a pattern file.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternBlock {
    pub index: usize,
    pub label: usize,
    pub image: BinaryImage,
}

/// Blocks of `P C index label` followed by `P` rows of `.`/`#`, separated
/// by blank lines.
pub fn write_pattern_file(scale: NetworkScale, blocks: &[PatternBlock]) -> String {
    let mut out = String::new();
    for (n, b) in blocks.iter().enumerate() {
        if n > 0 {
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "{} {} {} {}",
            scale.pixels_p, scale.categories_c, b.index, b.label
        );
        for row in b.image.rows() {
            out.push_str(&row);
            out.push('\n');
        }
    }
    out
}

pub fn parse_pattern_file(text: &str) -> Result<(NetworkScale, Vec<PatternBlock>)> {
    let mut scale: Option<NetworkScale> = None;
    let mut blocks = Vec::new();
    let mut lines = text.lines().map(str::trim_end).peekable();
    loop {
        while lines.peek().is_some_and(|l| l.trim().is_empty()) {
            lines.next();
        }
        let Some(header) = lines.next() else { break };
        let fields: Vec<usize> = header
            .split_whitespace()
            .map(|f| {
                f.parse()
                    .map_err(|_| Error::PatternFile(format!("bad header `{header}`")))
            })
            .collect::<Result<_>>()?;
        let [p, c, index, label] = fields[..] else {
            return Err(Error::PatternFile(format!(
                "header `{header}` must be `P C index label`"
            )));
        };
        let s = NetworkScale::new(p, c)?;
        match scale {
            None => scale = Some(s),
            Some(prev) if prev != s => {
                return Err(Error::PatternFile(format!(
                    "block {index} has scale {s}, file started with {prev}"
                )))
            }
            _ => {}
        }
        if label >= c {
            return Err(Error::PatternFile(format!(
                "label {label} >= {c} categories"
            )));
        }
        let rows: Vec<&str> = (0..p)
            .map(|_| {
                lines
                    .next()
                    .ok_or_else(|| Error::PatternFile("truncated block".into()))
            })
            .collect::<Result<_>>()?;
        blocks.push(PatternBlock {
            index,
            label,
            image: BinaryImage::from_rows(&rows)?,
        });
    }
    let scale = scale.ok_or_else(|| Error::PatternFile("no pattern blocks".into()))?;
    Ok((scale, blocks))
}

/// Training patterns from a parsed file: one block per label, ordered by label.
pub fn training_from_blocks(
    scale: NetworkScale,
    blocks: &[PatternBlock],
) -> Result<Vec<BinaryImage>> {
    let mut out: Vec<Option<BinaryImage>> = vec![None; scale.categories_c];
    for b in blocks {
        if out[b.label].replace(b.image.clone()).is_some() {
            return Err(Error::PatternFile(format!(
                "more than one training pattern for label {}",
                b.label
            )));
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(k, p)| p.ok_or_else(|| Error::PatternFile(format!("no pattern for label {k}"))))
        .collect()
}
