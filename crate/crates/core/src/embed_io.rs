//! word2vec text, word2vec binary and GloVe text embedding files.
//!
//! word2vec text: a `<count> <dim>` header line, then `token v1 .. vdim` per
//! line. word2vec binary: the same ASCII header line, then for each entry the
//! token bytes, one space, `dim` little-endian IEEE-754 `f32` values and a
//! newline byte. GloVe text: word2vec text without the header.
//!
//! Readers are strict apart from tolerating trailing whitespace.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbeddingFileFormat {
    Word2VecText,
    Word2VecBinary,
    GloveText,
}

impl EmbeddingFileFormat {
    pub fn flag(self) -> &'static str {
        match self {
            EmbeddingFileFormat::Word2VecText => "w2v-text",
            EmbeddingFileFormat::Word2VecBinary => "w2v-bin",
            EmbeddingFileFormat::GloveText => "glove",
        }
    }

    /// Inspect the start of a file and decide its format.
    ///
    /// Fails instead of guessing when the header could belong to more than one
    /// format, e.g. a GloVe file whose first row is `<number> <number>`.
    pub fn detect(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut head = Vec::new();
        file.take(1 << 16)
            .read_to_end(&mut head)
            .map_err(|e| Error::io(path, e))?;
        let first_end = head.iter().position(|&b| b == b'\n').unwrap_or(head.len());
        let first = std::str::from_utf8(&head[..first_end])
            .map_err(|_| Error::format(1, "first line is not UTF-8"))?;
        let fields: Vec<&str> = first.split_whitespace().collect();
        let header = match fields.as_slice() {
            [n, d] => match (n.parse::<usize>(), d.parse::<usize>()) {
                (Ok(n), Ok(d)) => Some((n, d)),
                _ => None,
            },
            _ => None,
        };
        let Some((_, dim)) = header else {
            return if fields.len() >= 2 && fields[1..].iter().all(|f| f.parse::<f32>().is_ok()) {
                Ok(EmbeddingFileFormat::GloveText)
            } else {
                Err(Error::format(1, "unrecognized embedding file header"))
            };
        };

        let rest = &head[(first_end + 1).min(head.len())..];
        let second_end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
        let text_row = std::str::from_utf8(&rest[..second_end]).ok().filter(|line| {
            let f: Vec<&str> = line.split_whitespace().collect();
            f.len() == dim + 1 && f[1..].iter().all(|x| x.parse::<f32>().is_ok())
        });
        if text_row.is_some() {
            // `n d` as the first row of a dim-1 GloVe file would also fit.
            if dim == 1 {
                return Err(Error::format(1, "ambiguous header; declare the format explicitly"));
            }
            Ok(EmbeddingFileFormat::Word2VecText)
        } else {
            Ok(EmbeddingFileFormat::Word2VecBinary)
        }
    }
}

impl fmt::Display for EmbeddingFileFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

impl FromStr for EmbeddingFileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w2v-text" => Ok(EmbeddingFileFormat::Word2VecText),
            "w2v-bin" => Ok(EmbeddingFileFormat::Word2VecBinary),
            "glove" => Ok(EmbeddingFileFormat::GloveText),
            _ => Err(Error::Config(format!(
                "unknown embedding format {s:?}; expected w2v-text, w2v-bin or glove"
            ))),
        }
    }
}

/// Read embeddings, optionally keeping only tokens in `restrict_to`.
pub fn read_embeddings(
    path: &Path,
    format: EmbeddingFileFormat,
    restrict_to: Option<&HashSet<String>>,
) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        EmbeddingFileFormat::Word2VecText => read_text(reader, true, restrict_to),
        EmbeddingFileFormat::GloveText => read_text(reader, false, restrict_to),
        EmbeddingFileFormat::Word2VecBinary => read_binary(reader, restrict_to),
    }
}

pub fn write_embeddings(
    matrix: &EmbeddingMatrix,
    path: &Path,
    format: EmbeddingFileFormat,
) -> Result<()> {
    if matrix.is_empty() {
        return Err(Error::Config("refusing to write an empty embedding matrix".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_to(matrix, &mut w, format)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Serialize into any writer. Floats in text formats use the shortest
/// representation that parses back to the same `f32`.
pub fn write_to<W: Write>(
    matrix: &EmbeddingMatrix,
    w: &mut W,
    format: EmbeddingFileFormat,
) -> std::io::Result<()> {
    if format != EmbeddingFileFormat::GloveText {
        writeln!(w, "{} {}", matrix.len(), matrix.dim())?;
    }
    for (token, row) in matrix.iter() {
        match format {
            EmbeddingFileFormat::Word2VecBinary => {
                write!(w, "{token} ")?;
                for &v in row {
                    w.write_f32::<LittleEndian>(v)?;
                }
                w.write_all(b"\n")?;
            }
            _ => {
                w.write_all(token.as_bytes())?;
                for v in row {
                    write!(w, " {v:?}")?;
                }
                w.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

struct Collector<'a> {
    restrict_to: Option<&'a HashSet<String>>,
    seen: HashMap<String, usize>,
    tokens: Vec<String>,
    data: Vec<f32>,
}

impl<'a> Collector<'a> {
    fn new(restrict_to: Option<&'a HashSet<String>>) -> Self {
        Collector {
            restrict_to,
            seen: HashMap::new(),
            tokens: Vec::new(),
            data: Vec::new(),
        }
    }

    fn push(&mut self, line: usize, token: &str, values: &[f32]) -> Result<()> {
        if let Some(prev) = self.seen.insert(token.to_string(), line) {
            return Err(Error::format(
                line,
                format!("duplicate token {token:?} (first seen at line {prev})"),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(line, format!("non-finite value in column {}", i + 1)));
        }
        if self.restrict_to.is_none_or(|keep| keep.contains(token)) {
            self.tokens.push(token.to_string());
            self.data.extend_from_slice(values);
        }
        Ok(())
    }

    fn finish(self, dim: usize) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::new(self.tokens, dim, self.data)
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    match fields.as_slice() {
        [n, d] => {
            let n = n.parse().map_err(|_| Error::format(1, format!("bad count {n:?}")))?;
            let d: usize = d.parse().map_err(|_| Error::format(1, format!("bad dim {d:?}")))?;
            if d == 0 {
                return Err(Error::format(1, "dimension must be positive"));
            }
            Ok((n, d))
        }
        _ => Err(Error::format(1, "expected header `<count> <dim>`")),
    }
}

fn read_text<R: BufRead>(
    reader: R,
    header: bool,
    restrict_to: Option<&HashSet<String>>,
) -> Result<EmbeddingMatrix> {
    let mut lines = reader.lines().enumerate();
    let mut expected = None;
    let mut dim = None;
    if header {
        let line = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::format(1, e.to_string()))?,
            None => return Err(Error::format(1, "empty file")),
        };
        let (n, d) = parse_header(&line)?;
        expected = Some(n);
        dim = Some(d);
    }

    let mut out = Collector::new(restrict_to);
    let mut rows = 0usize;
    let mut values = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::format(lineno, e.to_string()))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or_default();
        values.clear();
        for f in fields {
            let v: f32 = f
                .parse()
                .map_err(|_| Error::format(lineno, format!("bad value {f:?}")))?;
            values.push(v);
        }
        let d = *dim.get_or_insert(values.len());
        if token.is_empty() || values.len() != d || d == 0 {
            return Err(Error::format(
                lineno,
                format!("expected a token and {d} values, found {} values", values.len()),
            ));
        }
        rows += 1;
        if expected.is_some_and(|n| rows > n) {
            return Err(Error::format(lineno, "more rows than declared in the header"));
        }
        out.push(lineno, token, &values)?;
    }
    if let Some(n) = expected {
        if rows != n {
            return Err(Error::format(
                rows + 1,
                format!("header declares {n} rows, file has {rows}"),
            ));
        }
    }
    let dim = dim.ok_or_else(|| Error::format(1, "no embedding rows"))?;
    out.finish(dim)
}

fn read_binary<R: BufRead>(
    mut reader: R,
    restrict_to: Option<&HashSet<String>>,
) -> Result<EmbeddingMatrix> {
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::format(1, e.to_string()))?;
    let (n, dim) = parse_header(&header)?;

    let mut out = Collector::new(restrict_to);
    let mut token = Vec::new();
    let mut values = vec![0f32; dim];
    for entry in 0..n {
        let line = entry + 2;
        token.clear();
        reader
            .read_until(b' ', &mut token)
            .map_err(|e| Error::format(line, e.to_string()))?;
        if token.pop() != Some(b' ') {
            return Err(Error::format(line, "unexpected end of file in token"));
        }
        // Entries are newline-separated; tolerate any leading whitespace.
        let start = token.iter().position(|b| !b.is_ascii_whitespace());
        let token = match start {
            Some(s) => std::str::from_utf8(&token[s..])
                .map_err(|_| Error::format(line, "token is not UTF-8"))?,
            None => return Err(Error::format(line, "empty token")),
        };
        reader
            .read_f32_into::<LittleEndian>(&mut values)
            .map_err(|_| Error::format(line, format!("expected {dim} float values")))?;
        out.push(line, token, &values)?;
    }
    let mut rest = Vec::new();
    reader
        .read_to_end(&mut rest)
        .map_err(|e| Error::format(n + 2, e.to_string()))?;
    if !rest.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::format(n + 2, "trailing data after the declared entries"));
    }
    out.finish(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn reads_word2vec_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "e.txt", b"2 3\na 1 0 0\nb 0 1 0 \n");
        let m = read_embeddings(&p, EmbeddingFileFormat::Word2VecText, None).unwrap();
        assert_eq!(m.tokens(), &["a", "b"]);
        assert_eq!(m.dim(), 3);
        assert_eq!(m.lookup("b"), Some(&[0.0, 1.0, 0.0][..]));
    }

    #[test]
    fn glove_infers_dim() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "g.txt", b"the 0.1 0.2 0.3\nof -1 2 3.5\n");
        let m = read_embeddings(&p, EmbeddingFileFormat::GloveText, None).unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn writes_text_exactly() {
        let m = EmbeddingMatrix::new(vec!["a".into()], 2, vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_to(&m, &mut buf, EmbeddingFileFormat::Word2VecText).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1 2\na 1.0 -2.0\n");
    }

    #[test]
    fn writes_binary_layout() {
        let m = EmbeddingMatrix::new(vec!["ab".into()], 1, vec![1.0]).unwrap();
        let mut buf = Vec::new();
        write_to(&m, &mut buf, EmbeddingFileFormat::Word2VecBinary).unwrap();
        assert_eq!(buf, b"1 1\nab \x00\x00\x80\x3f\n");
    }

    #[test]
    fn refuses_empty_matrix() {
        let m = EmbeddingMatrix::new(vec![], 3, vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let r = write_embeddings(&m, &dir.path().join("x"), EmbeddingFileFormat::Word2VecText);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn format_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let cases: [(&[u8], usize); 5] = [
            (b"2 3\na 1 0 0\nb 0 1\n", 3),
            (b"2 3\na 1 0 0\na 0 1 0\n", 3),
            (b"2 2\na 1 0\nb nan 0\n", 3),
            (b"3 2\na 1 0\nb 0 1\n", 3),
            (b"x y\n", 1),
        ];
        for (i, (bytes, line)) in cases.iter().enumerate() {
            let p = write_file(&dir, &format!("bad{i}"), bytes);
            match read_embeddings(&p, EmbeddingFileFormat::Word2VecText, None) {
                Err(Error::Format { line: l, .. }) => assert_eq!(l, *line, "case {i}"),
                other => panic!("case {i}: {other:?}"),
            }
        }
    }

    #[test]
    fn truncated_binary_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "b.bin", b"2 1\na \x00\x00\x80\x3f\nb \x00\x00");
        assert!(matches!(
            read_embeddings(&p, EmbeddingFileFormat::Word2VecBinary, None),
            Err(Error::Format { line: 3, .. })
        ));
    }

    #[test]
    fn restrict_keeps_intersection() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "e.txt", b"3 1\na 1\nb 2\nc 3\n");
        let keep: HashSet<String> = ["c", "a", "zz"].iter().map(|s| s.to_string()).collect();
        let m = read_embeddings(&p, EmbeddingFileFormat::Word2VecText, Some(&keep)).unwrap();
        assert_eq!(m.tokens(), &["a", "c"]);
    }

    #[test]
    fn detects_formats() {
        let dir = tempfile::tempdir().unwrap();
        let m = EmbeddingMatrix::new(vec!["a".into(), "b".into()], 2, vec![1.0, 2.0, 3.0, 4.0])
            .unwrap();
        for fmt in [
            EmbeddingFileFormat::Word2VecText,
            EmbeddingFileFormat::Word2VecBinary,
            EmbeddingFileFormat::GloveText,
        ] {
            let p = dir.path().join(fmt.flag());
            write_embeddings(&m, &p, fmt).unwrap();
            assert_eq!(EmbeddingFileFormat::detect(&p).unwrap(), fmt);
        }
        let p = write_file(&dir, "amb", b"2 1\na 1\nb 2\n");
        assert!(EmbeddingFileFormat::detect(&p).is_err());
    }

    #[test]
    fn format_flags_parse() {
        for f in ["w2v-text", "w2v-bin", "glove"] {
            assert_eq!(f.parse::<EmbeddingFileFormat>().unwrap().flag(), f);
        }
        assert!("fasttext".parse::<EmbeddingFileFormat>().is_err());
    }
}
