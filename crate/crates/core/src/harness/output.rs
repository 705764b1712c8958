use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numeric::format_f64;

/// Compact JSON with every double written to 17 significant digits.
/// Non-finite values become `null`.
struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as one line of JSON (trailing newline included).
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(format!("serializing output: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// RFC 4180 CSV from a header and string rows.
pub fn csv_bytes<R, I, S>(header: &[&str], rows: R) -> Result<Vec<u8>>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(format!("writing CSV: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(format!("writing CSV: {e}")))
}

pub fn num(x: f64) -> String {
    format_f64(x)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
