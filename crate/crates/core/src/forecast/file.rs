//! Precomputed forecasts read from a `MUSTACHEPRED v1` text file.
//!
//! ```text
//! MUSTACHEPRED v1 w=100 k=3 vocab=af63dc4c8601ec8c
//! 907 8 -14 0
//! 908 -14 0 8
//! ```
//!
//! Each row holds the `k` deltas predicted at global request index `t`. Rows
//! are strictly increasing in `t`; requests without a row get
//! [`Forecast::NoPrediction`].

use std::collections::BTreeMap;
use std::fs::File;
use std::hash::Hasher;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use fnv::FnvHasher;

use super::{Forecast, ForecastError, ForecastRequest, Forecaster};

const MAGIC: &str = "MUSTACHEPRED";
const VERSION: &str = "v1";

/// 64-bit FNV-1a of `bytes`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

fn format_err(line: usize, reason: impl Into<String>) -> ForecastError {
    ForecastError::FileFormat {
        line,
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionFile {
    pub w: usize,
    pub k: usize,
    pub vocab_hash: u64,
    rows: BTreeMap<u64, Vec<i64>>,
}

impl PredictionFile {
    pub fn new(w: usize, k: usize, vocab_hash: u64) -> Self {
        Self {
            w,
            k,
            vocab_hash,
            rows: BTreeMap::new(),
        }
    }

    /// Appends the row for `t`, which must exceed every earlier `t`.
    pub fn push(&mut self, t: u64, deltas: Vec<i64>) -> Result<(), ForecastError> {
        let line = self.rows.len() + 2;
        if deltas.len() != self.k {
            return Err(format_err(line, format!("expected {} deltas, found {}", self.k, deltas.len())));
        }
        if let Some((&last, _)) = self.rows.last_key_value() {
            if t <= last {
                let what = if t == last { "duplicate" } else { "decreasing" };
                return Err(format_err(line, format!("{what} index {t} after {last}")));
            }
        }
        self.rows.insert(t, deltas);
        Ok(())
    }

    pub fn get(&self, t: u64) -> Option<&[i64]> {
        self.rows.get(&t).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (u64, &[i64])> {
        self.rows.iter().map(|(&t, d)| (t, d.as_slice()))
    }

    pub fn parse<R: BufRead>(input: R) -> Result<Self, ForecastError> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.ok_or_else(|| format_err(1, "missing header"))?;
        let mut file = parse_header(&header)?;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let t: u64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| format_err(line_no, "bad request index"))?;
            let deltas = fields
                .map(|f| f.parse::<i64>().map_err(|_| format_err(line_no, format!("bad delta {f:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            file.push(t, deltas).map_err(|e| match e {
                ForecastError::FileFormat { reason, .. } => format_err(line_no, reason),
                other => other,
            })?;
        }
        Ok(file)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self, ForecastError> {
        Self::parse(BufReader::new(File::open(path)?))
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{MAGIC} {VERSION} w={} k={} vocab={:016x}", self.w, self.k, self.vocab_hash)?;
        for (t, deltas) in &self.rows {
            write!(out, "{t}")?;
            for d in deltas {
                write!(out, " {d}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn parse_header(line: &str) -> Result<PredictionFile, ForecastError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MAGIC {
        return Err(format_err(1, "expected `MUSTACHEPRED v1 w=<w> k=<k> vocab=<hex>`"));
    }
    if fields[1] != VERSION {
        return Err(format_err(1, format!("unsupported version {}", fields[1])));
    }
    let value = |key: &str, field: &str| -> Result<String, ForecastError> {
        field
            .strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| format_err(1, format!("expected {key}=…, found {field:?}")))
    };
    let w = value("w", fields[2])?
        .parse()
        .map_err(|_| format_err(1, "w is not a non-negative integer"))?;
    let k: usize = value("k", fields[3])?
        .parse()
        .map_err(|_| format_err(1, "k is not a non-negative integer"))?;
    if k == 0 {
        return Err(format_err(1, "k must be at least 1"));
    }
    let hex = value("vocab", fields[4])?;
    let hex = hex.trim_start_matches("0x");
    let vocab_hash = u64::from_str_radix(hex, 16).map_err(|_| format_err(1, "vocab is not a hex hash"))?;
    Ok(PredictionFile::new(w, k, vocab_hash))
}

/// Serves the rows of a [`PredictionFile`] keyed by [`ForecastRequest::time`].
#[derive(Clone, Debug)]
pub struct FileForecaster {
    file: PredictionFile,
}

impl FileForecaster {
    /// Checks the file against the configured horizon and, if given, the hash
    /// of the vocabulary file it was made for.
    pub fn new(file: PredictionFile, k: usize, vocab_hash: Option<u64>) -> Result<Self, ForecastError> {
        if file.k != k {
            return Err(ForecastError::HorizonMismatch { file: file.k, expected: k });
        }
        if let Some(expected) = vocab_hash {
            if file.vocab_hash != expected {
                return Err(ForecastError::VocabularyMismatch {
                    file: file.vocab_hash,
                    expected,
                });
            }
        }
        Ok(Self { file })
    }

    pub fn load(path: impl AsRef<Path>, k: usize, vocab_hash: Option<u64>) -> Result<Self, ForecastError> {
        Self::new(PredictionFile::read_path(path)?, k, vocab_hash)
    }

    pub fn file(&self) -> &PredictionFile {
        &self.file
    }
}

impl Forecaster for FileForecaster {
    fn name(&self) -> &str {
        "file"
    }

    fn forecast(&mut self, request: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
        Ok(match self.file.get(request.time) {
            Some(d) => Forecast::Deltas(d[..d.len().min(request.horizon)].to_vec()),
            None => Forecast::NoPrediction,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::AuxContext;
    use crate::trace::accesses_from_pages;

    fn parse(text: &str) -> Result<PredictionFile, ForecastError> {
        PredictionFile::parse(text.as_bytes())
    }

    fn ask(f: &mut FileForecaster, t: u64) -> Forecast {
        let trace = accesses_from_pages(&[1]);
        let aux = AuxContext::default();
        f.forecast(&ForecastRequest {
            time: t,
            position: 0,
            history: &trace,
            current_page: trace[0].page,
            horizon: 3,
            aux: &aux,
        })
        .unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn lookup() {
        let file = parse("MUSTACHEPRED v1 w=100 k=3 vocab=00000000000000ff\n907 8 -14 0\n").unwrap();
        assert_eq!((file.w, file.k, file.vocab_hash), (100, 3, 0xff));
        let mut f = FileForecaster::new(file, 3, Some(0xff)).unwrap();
        assert_eq!(ask(&mut f, 907), Forecast::Deltas(vec![8, -14, 0]));
        assert_eq!(ask(&mut f, 906), Forecast::NoPrediction);
    }

    #[test]
    fn short_row_is_rejected() {
        let err = parse("MUSTACHEPRED v1 w=100 k=3 vocab=0\n5 1 2\n").unwrap_err();
        assert!(matches!(err, ForecastError::FileFormat { line: 2, .. }), "{err}");
    }

    #[test]
    fn ordering_is_enforced() {
        let dup = parse("MUSTACHEPRED v1 w=1 k=1 vocab=0\n5 1\n5 2\n").unwrap_err();
        assert!(matches!(dup, ForecastError::FileFormat { line: 3, .. }));
        assert!(parse("MUSTACHEPRED v1 w=1 k=1 vocab=0\n5 1\n4 2\n").is_err());
    }

    #[test]
    fn bad_headers() {
        for h in [
            "",
            "MUSTACHEPRED v2 w=1 k=1 vocab=0",
            "MUSTACHEPRED v1 w=1 k=0 vocab=0",
            "MUSTACHEPRED v1 k=1 w=1 vocab=0",
            "MUSTACHEPRED v1 w=1 k=1 vocab=xyz",
            "PRED v1 w=1 k=1 vocab=0",
        ] {
            assert!(parse(h).is_err(), "{h:?}");
        }
        assert!(parse("MUSTACHEPRED v1 w=1 k=1 vocab=0\n5 x\n").is_err());
    }

    #[test]
    fn configuration_checks() {
        let file = parse("MUSTACHEPRED v1 w=100 k=3 vocab=ff\n").unwrap();
        assert!(matches!(
            FileForecaster::new(file.clone(), 4, None),
            Err(ForecastError::HorizonMismatch { file: 3, expected: 4 })
        ));
        assert!(matches!(
            FileForecaster::new(file.clone(), 3, Some(1)),
            Err(ForecastError::VocabularyMismatch { .. })
        ));
        assert!(FileForecaster::new(file, 3, None).is_ok());
    }

    #[test]
    fn round_trip() {
        let mut file = PredictionFile::new(100, 2, fnv1a64(b"delta,count\n1,5\n"));
        file.push(3, vec![1, -1]).unwrap();
        file.push(10, vec![0, 7]).unwrap();
        assert!(file.push(10, vec![0, 0]).is_err());
        let mut buf = Vec::new();
        file.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("MUSTACHEPRED v1 w=100 k=2 vocab="));
        assert_eq!(parse(&text).unwrap(), file);
    }
}
