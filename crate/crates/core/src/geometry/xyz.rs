//! Extended-XYZ reader and writer.
//!
//! ```text
//! 2
//! Lattice="10 0 0 0 10 0 0 0 10" Properties=species:S:1:pos:R:3:forces:R:3 energy=-4.2 pbc="T T T"
//! Si 0.0 0.0 0.0 0.1 0.0 0.0
//! Si 2.3 0.0 0.0 -0.1 0.0 0.0
//! ```
//!
//! Floats are written with 17 significant digits so every field survives a
//! write/read cycle bit for bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{atomic_number, symbol, AtomicConfiguration};
use crate::{Error, Result};

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn xyz_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Xyz {
        line,
        msg: msg.into(),
    }
}

pub fn write_frame<W: Write>(w: &mut W, config: &AtomicConfiguration) -> Result<()> {
    writeln!(w, "{}", config.len())?;
    let mut header = Vec::new();
    if let Some(cell) = &config.cell {
        let vals: Vec<String> = cell.iter().flatten().map(|&x| fmt_f(x)).collect();
        header.push(format!("Lattice=\"{}\"", vals.join(" ")));
    }
    let props = if config.forces.is_some() {
        "species:S:1:pos:R:3:forces:R:3"
    } else {
        "species:S:1:pos:R:3"
    };
    header.push(format!("Properties={props}"));
    if let Some(e) = config.energy {
        header.push(format!("energy={}", fmt_f(e)));
    }
    let pbc: Vec<&str> = config.pbc.iter().map(|&p| if p { "T" } else { "F" }).collect();
    header.push(format!("pbc=\"{}\"", pbc.join(" ")));
    for (k, v) in &config.info {
        if v.contains(char::is_whitespace) || v.is_empty() {
            header.push(format!("{k}=\"{v}\""));
        } else {
            header.push(format!("{k}={v}"));
        }
    }
    writeln!(w, "{}", header.join(" "))?;
    for (idx, (p, &z)) in config.positions.iter().zip(&config.species).enumerate() {
        let sym = symbol(z).ok_or(Error::UnknownSpecies(z))?;
        write!(w, "{sym} {} {} {}", fmt_f(p[0]), fmt_f(p[1]), fmt_f(p[2]))?;
        if let Some(f) = &config.forces {
            let f = f[idx];
            write!(w, " {} {} {}", fmt_f(f[0]), fmt_f(f[1]), fmt_f(f[2]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_frames<W: Write>(w: &mut W, configs: &[AtomicConfiguration]) -> Result<()> {
    for c in configs {
        write_frame(w, c)?;
    }
    Ok(())
}

pub fn to_string(configs: &[AtomicConfiguration]) -> Result<String> {
    let mut buf = Vec::new();
    write_frames(&mut buf, configs)?;
    Ok(String::from_utf8(buf).expect("xyz output is ASCII"))
}

/// Splits `k=v k2="a b"` into pairs, honoring double quotes.
fn parse_key_values(s: &str, line: usize) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' || c.is_whitespace() {
                break;
            }
            key.push(c);
            chars.next();
        }
        if chars.peek() != Some(&'=') {
            // bare flag
            out.push((key, "T".to_string()));
            continue;
        }
        chars.next();
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            let mut closed = false;
            for c in chars.by_ref() {
                if c == '"' {
                    closed = true;
                    break;
                }
                value.push(c);
            }
            if !closed {
                return Err(xyz_err(line, format!("unterminated quote for key {key}")));
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        out.push((key, value));
    }
    Ok(out)
}

enum Column {
    Species,
    Pos,
    Forces,
    Skip(usize),
}

fn parse_properties(spec: &str, line: usize) -> Result<Vec<Column>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() % 3 != 0 {
        return Err(xyz_err(line, format!("malformed Properties '{spec}'")));
    }
    let mut cols = Vec::new();
    for chunk in parts.chunks(3) {
        let count: usize = chunk[2]
            .parse()
            .map_err(|_| xyz_err(line, format!("bad column count '{}'", chunk[2])))?;
        let col = match (chunk[0], chunk[1], count) {
            ("species", "S", 1) => Column::Species,
            ("pos", "R", 3) => Column::Pos,
            ("forces", "R", 3) => Column::Forces,
            _ => Column::Skip(count),
        };
        cols.push(col);
    }
    Ok(cols)
}

fn parse_f(tok: &str, line: usize) -> Result<f64> {
    tok.parse()
        .map_err(|_| xyz_err(line, format!("bad number '{tok}'")))
}

pub fn read_frames<R: BufRead>(reader: R) -> Result<Vec<AtomicConfiguration>> {
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut frames = Vec::new();
    let mut idx = 0;
    while idx < lines.len() {
        if lines[idx].trim().is_empty() {
            idx += 1;
            continue;
        }
        let lineno = idx + 1;
        let n: usize = lines[idx]
            .trim()
            .parse()
            .map_err(|_| xyz_err(lineno, "expected atom count"))?;
        let header = lines
            .get(idx + 1)
            .ok_or_else(|| xyz_err(lineno + 1, "missing header line"))?;
        let kv = parse_key_values(header, lineno + 1)?;

        let mut cell = None;
        let mut pbc = [false; 3];
        let mut pbc_given = false;
        let mut energy = None;
        let mut columns = vec![Column::Species, Column::Pos];
        let mut info = BTreeMap::new();
        for (k, v) in kv {
            match k.as_str() {
                "Lattice" => {
                    let vals: Vec<f64> = v
                        .split_whitespace()
                        .map(|t| parse_f(t, lineno + 1))
                        .collect::<Result<_>>()?;
                    if vals.len() != 9 {
                        return Err(xyz_err(lineno + 1, "Lattice needs 9 numbers"));
                    }
                    cell = Some([
                        [vals[0], vals[1], vals[2]],
                        [vals[3], vals[4], vals[5]],
                        [vals[6], vals[7], vals[8]],
                    ]);
                }
                "Properties" => columns = parse_properties(&v, lineno + 1)?,
                "energy" => energy = Some(parse_f(&v, lineno + 1)?),
                "pbc" => {
                    let flags: Vec<&str> = v.split_whitespace().collect();
                    if flags.len() != 3 {
                        return Err(xyz_err(lineno + 1, "pbc needs 3 flags"));
                    }
                    for (d, f) in flags.iter().enumerate() {
                        pbc[d] = matches!(*f, "T" | "True" | "true" | "1");
                    }
                    pbc_given = true;
                }
                _ => {
                    info.insert(k, v);
                }
            }
        }
        if !pbc_given && cell.is_some() {
            pbc = [true; 3];
        }

        let has_forces = columns.iter().any(|c| matches!(c, Column::Forces));
        let mut positions = Vec::with_capacity(n);
        let mut species = Vec::with_capacity(n);
        let mut forces = Vec::with_capacity(if has_forces { n } else { 0 });
        for a in 0..n {
            let ln = idx + 2 + a;
            let line = lines
                .get(ln)
                .ok_or_else(|| xyz_err(ln + 1, "truncated frame"))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let mut t = 0;
            let mut take = |k: usize| -> Result<&[&str]> {
                let s = toks
                    .get(t..t + k)
                    .ok_or_else(|| xyz_err(ln + 1, "too few columns"))?;
                t += k;
                Ok(s)
            };
            for col in &columns {
                match col {
                    Column::Species => {
                        let s = take(1)?[0];
                        let z = atomic_number(s)
                            .ok_or_else(|| xyz_err(ln + 1, format!("unknown element '{s}'")))?;
                        species.push(z);
                    }
                    Column::Pos => {
                        let v = take(3)?;
                        positions.push([
                            parse_f(v[0], ln + 1)?,
                            parse_f(v[1], ln + 1)?,
                            parse_f(v[2], ln + 1)?,
                        ]);
                    }
                    Column::Forces => {
                        let v = take(3)?;
                        forces.push([
                            parse_f(v[0], ln + 1)?,
                            parse_f(v[1], ln + 1)?,
                            parse_f(v[2], ln + 1)?,
                        ]);
                    }
                    Column::Skip(k) => {
                        take(*k)?;
                    }
                }
            }
        }
        let config = AtomicConfiguration {
            positions,
            species,
            cell,
            pbc,
            energy,
            forces: has_forces.then_some(forces),
            info,
        };
        config.validate()?;
        frames.push(config);
        idx += 2 + n;
    }
    Ok(frames)
}

pub fn from_str(s: &str) -> Result<Vec<AtomicConfiguration>> {
    read_frames(s.as_bytes())
}

pub fn read_file(path: impl AsRef<std::path::Path>) -> Result<Vec<AtomicConfiguration>> {
    let f = std::fs::File::open(path)?;
    read_frames(std::io::BufReader::new(f))
}

pub fn write_file(path: impl AsRef<std::path::Path>, configs: &[AtomicConfiguration]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_frames(&mut w, configs)?;
    w.flush()?;
    Ok(())
}
