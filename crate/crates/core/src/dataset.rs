//! Dataset persistence (decimal CSV), deterministic train/test splitting and
//! exact summary statistics.
//!
//! File layout, LF line endings:
//!
//! ```text
//! # totient-dataset v1 bits=<B> count=<C> seed=<S>
//! p,q,n,epsilon
//! <p>,<q>,<n>,<epsilon>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::ntheory::Natural;
use crate::regress::Rational;
use crate::samples::RsaSample;

pub const FORMAT_VERSION: u32 = 1;
pub const COLUMN_HEADER: &str = "p,q,n,epsilon";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetHeader {
    pub modulus_bits: u64,
    pub count: u64,
    pub master_seed: u64,
    pub format_version: u32,
}

impl DatasetHeader {
    pub fn new(modulus_bits: u64, count: u64, master_seed: u64) -> Self {
        Self {
            modulus_bits,
            count,
            master_seed,
            format_version: FORMAT_VERSION,
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# totient-dataset v{} bits={} count={} seed={}",
            self.format_version, self.modulus_bits, self.count, self.master_seed
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let bad = |m: &str| Error::parse(1, format!("{m}: {line:?}"));
        let rest = line
            .strip_prefix("# totient-dataset v")
            .ok_or_else(|| bad("missing dataset header"))?;
        let mut parts = rest.split(' ');
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad format version"))?;
        if version != FORMAT_VERSION {
            return Err(bad("unsupported format version"));
        }
        let mut field = |key: &str| -> Result<u64> {
            parts
                .next()
                .and_then(|kv| kv.strip_prefix(key))
                .and_then(|v| v.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(&format!("bad or missing {key}")))
        };
        let modulus_bits = field("bits")?;
        let count = field("count")?;
        let master_seed = field("seed")?;
        if parts.next().is_some() {
            return Err(bad("trailing header fields"));
        }
        Ok(Self {
            modulus_bits,
            count,
            master_seed,
            format_version: version,
        })
    }
}

/// Writes the header lines then one row per sample. Returns the row count,
/// which must match `header.count`.
pub fn write_csv<W, I>(header: &DatasetHeader, samples: I, out: W) -> Result<u64>
where
    W: Write,
    I: IntoIterator<Item = RsaSample>,
{
    let mut out = BufWriter::new(out);
    writeln!(out, "{}", header.comment_line())?;
    writeln!(out, "{COLUMN_HEADER}")?;
    let mut rows = 0u64;
    for s in samples {
        writeln!(out, "{},{},{},{}", s.p, s.q, s.n, s.epsilon)?;
        rows += 1;
    }
    out.flush()?;
    if rows != header.count {
        return Err(Error::Format(format!(
            "header declares {} rows but {rows} were written",
            header.count
        )));
    }
    Ok(rows)
}

pub fn write_csv_file<I>(header: &DatasetHeader, samples: I, path: &Path) -> Result<u64>
where
    I: IntoIterator<Item = RsaSample>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(header, samples, file).map_err(|e| match e {
        Error::Stream(source) => Error::io(path, source),
        other => other,
    })
}

/// Parses the two header lines and returns a lazy row iterator.
pub fn read_csv<R: BufRead>(mut source: R, strict: bool) -> Result<(DatasetHeader, DatasetReader<R>)> {
    let mut line = String::new();
    source.read_line(&mut line)?;
    let header = DatasetHeader::parse(line.trim_end_matches('\n'))?;
    line.clear();
    source.read_line(&mut line)?;
    if line.trim_end_matches('\n') != COLUMN_HEADER {
        return Err(Error::parse(2, format!("expected column header {COLUMN_HEADER:?}")));
    }
    let reader = DatasetReader {
        source,
        header: header.clone(),
        strict,
        line_no: 2,
        rows: 0,
        buf: String::new(),
        done: false,
    };
    Ok((header, reader))
}

pub fn read_csv_file(path: &Path, strict: bool) -> Result<(DatasetHeader, DatasetReader<BufReader<File>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file), strict)
}

/// Reads and collects every row, failing on the first bad one.
pub fn load_csv_file(path: &Path, strict: bool) -> Result<(DatasetHeader, Vec<RsaSample>)> {
    let (header, rows) = read_csv_file(path, strict)?;
    let samples = rows.collect::<Result<Vec<_>>>()?;
    Ok((header, samples))
}

/// Row iterator produced by [`read_csv`].
pub struct DatasetReader<R> {
    source: R,
    header: DatasetHeader,
    strict: bool,
    line_no: usize,
    rows: u64,
    buf: String,
    done: bool,
}

impl<R: BufRead> DatasetReader<R> {
    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    fn parse_row(&self, line: &str) -> Result<RsaSample> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                self.line_no,
                format!("expected 4 columns, found {}", fields.len()),
            ));
        }
        let mut values = Vec::with_capacity(4);
        for (name, field) in ["p", "q", "n", "epsilon"].iter().zip(&fields) {
            if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::parse(self.line_no, format!("malformed integer in {name}: {field:?}")));
            }
            let v = Natural::from_str(field)
                .map_err(|e| Error::parse(self.line_no, format!("{name}: {e}")))?;
            values.push(v);
        }
        let epsilon = values.pop().unwrap();
        let n = values.pop().unwrap();
        let q = values.pop().unwrap();
        let p = values.pop().unwrap();
        let sample = RsaSample { p, q, n, epsilon };
        if self.strict {
            sample
                .check(Some(self.header.modulus_bits))
                .map_err(|m| Error::parse(self.line_no, m))?;
        }
        Ok(sample)
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<RsaSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        self.buf.clear();
        match self.source.read_line(&mut self.buf) {
            Err(e) => {
                self.done = true;
                Some(Err(e.into()))
            }
            Ok(0) => {
                self.done = true;
                (self.rows != self.header.count).then(|| {
                    Err(Error::parse(
                        self.line_no,
                        format!("header declares {} rows, file has {}", self.header.count, self.rows),
                    ))
                })
            }
            Ok(_) => {
                self.line_no += 1;
                let line = self.buf.strip_suffix('\n').unwrap_or(&self.buf);
                let row = self.parse_row(line);
                if row.is_err() {
                    self.done = true;
                } else {
                    self.rows += 1;
                }
                Some(row)
            }
        }
    }
}

/// Train/test split rule: row `i` is a training row iff a 64-bit mix of
/// `(split_seed, i)`, read as a fraction of 2^64, is below `train_fraction`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    train_fraction: Rational,
    pub split_seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: Rational, split_seed: u64) -> Result<Self> {
        if train_fraction <= Rational::zero() || train_fraction >= Rational::from_integer(1.into()) {
            return Err(Error::domain(format!(
                "train fraction must lie strictly between 0 and 1, got {train_fraction}"
            )));
        }
        Ok(Self {
            train_fraction,
            split_seed,
        })
    }

    pub fn train_fraction(&self) -> &Rational {
        &self.train_fraction
    }

    pub fn is_train(&self, index: u64) -> bool {
        let h = splitmix64(self.split_seed ^ splitmix64(index));
        // h / 2^64 < num / den  ⇔  h · den < num · 2^64
        let lhs = BigInt::from(h) * self.train_fraction.denom();
        let rhs = self.train_fraction.numer() << 64u32;
        lhs < rhs
    }

    /// Partitions `samples` into `(train, test)`, each in input order.
    pub fn split<T, I: IntoIterator<Item = T>>(&self, samples: I) -> (Vec<T>, Vec<T>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, s) in samples.into_iter().enumerate() {
            if self.is_train(i as u64) {
                train.push(s);
            } else {
                test.push(s);
            }
        }
        (train, test)
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self::new(BigRational::new(4.into(), 5.into()), 0).unwrap()
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Exact min / max / sum of one tracked quantity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extent {
    pub min: Natural,
    pub max: Natural,
    pub sum: Natural,
}

impl Extent {
    fn new(v: Natural) -> Self {
        Self {
            min: v.clone(),
            max: v.clone(),
            sum: v,
        }
    }

    fn push(&mut self, v: Natural) {
        if v < self.min {
            self.min = v.clone();
        }
        if v > self.max {
            self.max = v.clone();
        }
        self.sum += v;
    }

    fn merge(&mut self, other: &Extent) {
        if other.min < self.min {
            self.min = other.min.clone();
        }
        if other.max > self.max {
            self.max = other.max.clone();
        }
        self.sum += &other.sum;
    }

    pub fn mean(&self, count: u64) -> Rational {
        BigRational::new(BigInt::from(self.sum.clone()), BigInt::from(count))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetStats {
    pub count: u64,
    pub n: Extent,
    pub prime_sum: Extent,
    pub epsilon: Extent,
}

impl DatasetStats {
    pub fn from_sample(s: &RsaSample) -> Self {
        Self {
            count: 1,
            n: Extent::new(s.n.clone()),
            prime_sum: Extent::new(s.prime_sum()),
            epsilon: Extent::new(s.epsilon.clone()),
        }
    }

    pub fn push(&mut self, s: &RsaSample) {
        self.count += 1;
        self.n.push(s.n.clone());
        self.prime_sum.push(s.prime_sum());
        self.epsilon.push(s.epsilon.clone());
    }

    pub fn merge(&mut self, other: &DatasetStats) {
        self.count += other.count;
        self.n.merge(&other.n);
        self.prime_sum.merge(&other.prime_sum);
        self.epsilon.merge(&other.epsilon);
    }

    pub fn mean_n(&self) -> Rational {
        self.n.mean(self.count)
    }

    pub fn mean_prime_sum(&self) -> Rational {
        self.prime_sum.mean(self.count)
    }

    pub fn mean_epsilon(&self) -> Rational {
        self.epsilon.mean(self.count)
    }
}

pub fn stats<'a, I: IntoIterator<Item = &'a RsaSample>>(samples: I) -> Result<DatasetStats> {
    let mut iter = samples.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::domain("stats of an empty sample set"))?;
    let mut acc = DatasetStats::from_sample(first);
    for s in iter {
        acc.push(s);
    }
    Ok(acc)
}
