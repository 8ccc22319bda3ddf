//! Text Pin memory-trace parsing.
//!
//! One record per line, whitespace separated: `PC OP MEM N_BYTES [MEM_PREF]`,
//! addresses in `0x` hex, `OP` is `R` or `W`.

use std::io::BufRead;

use super::{Op, TraceError};

/// One line of a Pin log.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawTraceRecord {
    pub pc: u64,
    pub op: Op,
    pub mem: u64,
    pub n_bytes: u32,
    pub mem_pref: Option<u64>,
}

/// What to do with a line that does not parse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParseMode {
    /// Fail with the offending line number.
    Strict,
    /// Skip it and count it.
    #[default]
    Lenient,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    pub mode: ParseMode,
}

/// Parsed records plus the number of lines dropped in lenient mode.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PinParse {
    pub records: Vec<RawTraceRecord>,
    pub skipped_lines: usize,
}

fn parse_hex(field: &str) -> Result<u64, String> {
    let digits = field
        .strip_prefix("0x")
        .or_else(|| field.strip_prefix("0X"))
        .ok_or_else(|| format!("address {field:?} lacks a 0x prefix"))?;
    u64::from_str_radix(digits, 16).map_err(|e| format!("bad address {field:?}: {e}"))
}

/// Parses a single non-empty line.
pub fn parse_record(line: &str) -> Result<RawTraceRecord, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if !(4..=5).contains(&fields.len()) {
        return Err(format!("expected 4 or 5 columns, found {}", fields.len()));
    }
    let pc = parse_hex(fields[0])?;
    let op = match fields[1] {
        "R" => Op::Read,
        "W" => Op::Write,
        other => return Err(format!("unknown op code {other:?}")),
    };
    let mem = parse_hex(fields[2])?;
    let n_bytes: u32 = fields[3]
        .parse()
        .map_err(|e| format!("bad byte count {:?}: {e}", fields[3]))?;
    if n_bytes == 0 {
        return Err("byte count must be positive".to_string());
    }
    let mem_pref = fields.get(4).map(|f| parse_hex(f)).transpose()?;
    Ok(RawTraceRecord {
        pc,
        op,
        mem,
        n_bytes,
        mem_pref,
    })
}

/// Streams a Pin log. Blank lines are ignored in both modes.
pub fn parse_pin_trace<R: BufRead>(input: R, options: ParseOptions) -> Result<PinParse, TraceError> {
    let mut out = PinParse::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match parse_record(trimmed) {
            Ok(r) => out.records.push(r),
            Err(reason) => match options.mode {
                ParseMode::Strict => return Err(TraceError::Parse { line: i + 1, reason }),
                ParseMode::Lenient => out.skipped_lines += 1,
            },
        }
    }
    Ok(out)
}
