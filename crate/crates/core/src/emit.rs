//! Deterministic output formatting: every float is emitted with 17
//! significant digits so seeded runs are byte-identical.

use std::io;

use serde::Serialize;

/// 17 significant digits, scientific notation.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "NA".to_string();
    }
    format!("{v:.16e}")
}

/// `serde_json` formatter that writes all floats via [`fmt_f64`].
struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(format!("{value:.16e}").as_bytes())
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(format!("{value:.8e}").as_bytes())
    }
}

/// Serialize to JSON with fixed-precision floats and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
    value.serialize(&mut ser)?;
    let mut s = String::from_utf8(buf).expect("serde_json emits utf-8");
    s.push('\n');
    Ok(s)
}

/// One CSV field for an optional value; `NA` marks missing entries.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt_f64(x),
        None => "NA".to_string(),
    }
}
