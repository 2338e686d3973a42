//! Binary little-endian PLY in the de-facto 3DGS layout.
//!
//! Stored values are pre-activation: `opacity` is a logit, `scale_*` are
//! natural logs, `rot_*` is an unnormalized `w, x, y, z` quaternion.
//! `f_rest_*` is channel-major: all red higher-band coefficients, then
//! green, then blue.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{sh_coeff_count, Gaussian, GaussianScene, MAX_SH_DEGREE};

/// Opacities are clamped to `[OPACITY_EPS, 1 - OPACITY_EPS]` before the logit.
pub const OPACITY_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => f64::from(b[0] as i8),
            ScalarType::U8 => f64::from(b[0]),
            ScalarType::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            ScalarType::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            ScalarType::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ScalarType::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ScalarType::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    /// (name, type, byte offset within record)
    properties: Vec<(String, ScalarType, usize)>,
    stride: usize,
}

fn parse_header(reader: &mut impl BufRead, ctx: &str) -> Result<Vec<Element>> {
    let fmt = |m: String| Error::format(ctx, m);
    let mut line = String::new();
    let mut next_line = |line: &mut String| -> Result<()> {
        line.clear();
        let n = reader
            .read_line(line)
            .map_err(|e| Error::io(ctx.to_string(), e))?;
        if n == 0 {
            return Err(Error::format(ctx, "unexpected end of file in header"));
        }
        Ok(())
    };

    next_line(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(fmt("missing 'ply' magic".into()));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        next_line(&mut line)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["format", "binary_little_endian", _] => saw_format = true,
            ["format", other, ..] => {
                return Err(fmt(format!(
                    "unsupported format '{other}', expected binary_little_endian"
                )))
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| fmt(format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    stride: 0,
                });
            }
            ["property", "list", ..] => {
                return Err(fmt("list properties are not supported".into()));
            }
            ["property", ty, name] => {
                let ty = ScalarType::parse(ty)
                    .ok_or_else(|| fmt(format!("unknown property type '{ty}'")))?;
                let el = elements
                    .last_mut()
                    .ok_or_else(|| fmt("property before any element".into()))?;
                el.properties.push((name.to_string(), ty, el.stride));
                el.stride += ty.size();
            }
            [] => {}
            _ => {
                return Err(fmt(format!(
                    "unrecognized header line '{}'",
                    line.trim_end()
                )))
            }
        }
    }
    if !saw_format {
        return Err(fmt("missing format line".into()));
    }
    Ok(elements)
}

/// Reads a 3DGS PLY, applying sigmoid to opacity, exp to scales and
/// normalizing rotations. The SH degree follows from the `f_rest_*` count.
pub fn load_ply(path: impl AsRef<Path>) -> Result<GaussianScene> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply(&mut BufReader::new(file), &path.display().to_string())
}

pub fn read_ply(reader: &mut impl BufRead, ctx: &str) -> Result<GaussianScene> {
    let elements = parse_header(reader, ctx)?;
    let mut skip = 0usize;
    let mut vertex = None;
    for el in &elements {
        if el.name == "vertex" {
            vertex = Some(el);
            break;
        }
        skip += el.count * el.stride;
    }
    let vertex = vertex.ok_or_else(|| Error::format(ctx, "no 'vertex' element"))?;
    if skip > 0 {
        std::io::copy(&mut reader.by_ref().take(skip as u64), &mut std::io::sink())
            .map_err(|e| Error::io(ctx.to_string(), e))?;
    }

    let by_name: HashMap<&str, (ScalarType, usize)> = vertex
        .properties
        .iter()
        .map(|(n, t, o)| (n.as_str(), (*t, *o)))
        .collect();
    let lookup = |name: &str| {
        by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::format(ctx, format!("missing property '{name}'")))
    };

    let rest_count = (0..)
        .take_while(|i| by_name.contains_key(format!("f_rest_{i}").as_str()))
        .count();
    let extra = by_name.keys().filter(|k| k.starts_with("f_rest_")).count();
    if extra != rest_count {
        return Err(Error::format(
            ctx,
            "f_rest_* properties are not contiguous from 0",
        ));
    }
    let sh_degree = (0..=MAX_SH_DEGREE)
        .find(|&d| 3 * (sh_coeff_count(d) - 1) == rest_count)
        .ok_or_else(|| {
            Error::format(
                ctx,
                format!("{rest_count} f_rest properties match no SH degree"),
            )
        })?;
    let coeffs = sh_coeff_count(sh_degree);

    let fields = |names: &[&str]| names.iter().map(|n| lookup(n)).collect::<Result<Vec<_>>>();
    let pos = fields(&["x", "y", "z"])?;
    let dc = fields(&["f_dc_0", "f_dc_1", "f_dc_2"])?;
    let opacity = lookup("opacity")?;
    let scale = fields(&["scale_0", "scale_1", "scale_2"])?;
    let rot = fields(&["rot_0", "rot_1", "rot_2", "rot_3"])?;
    let rest: Vec<_> = (0..rest_count)
        .map(|i| lookup(&format!("f_rest_{i}")))
        .collect::<Result<_>>()?;

    let mut scene = GaussianScene::new(sh_degree)?;
    let mut record = vec![0u8; vertex.stride];
    for index in 0..vertex.count {
        reader.read_exact(&mut record).map_err(|e| {
            Error::format(
                ctx,
                format!("truncated vertex data at Gaussian {index}: {e}"),
            )
        })?;
        let get = |(t, o): (ScalarType, usize)| t.read(&record[o..]);
        let mut values: Vec<f64> = Vec::with_capacity(14 + rest_count);
        values.extend(pos.iter().map(|&f| get(f)));
        values.extend(dc.iter().map(|&f| get(f)));
        values.push(get(opacity));
        values.extend(scale.iter().map(|&f| get(f)));
        values.extend(rot.iter().map(|&f| get(f)));
        values.extend(rest.iter().map(|&f| get(f)));
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(
                ctx,
                format!("non-finite value in Gaussian {index} (field {bad})"),
            ));
        }

        let mut sh = vec![[0.0f32; 3]; coeffs];
        sh[0] = [values[3] as f32, values[4] as f32, values[5] as f32];
        if coeffs > 1 {
            for (c, channel) in values[14..].chunks(coeffs - 1).enumerate() {
                for (j, v) in channel.iter().enumerate() {
                    sh[j + 1][c] = *v as f32;
                }
            }
        }
        let g = Gaussian {
            mean: [values[0] as f32, values[1] as f32, values[2] as f32],
            rotation: [
                values[10] as f32,
                values[11] as f32,
                values[12] as f32,
                values[13] as f32,
            ],
            scale: [
                values[7].exp() as f32,
                values[8].exp() as f32,
                values[9].exp() as f32,
            ],
            opacity: sigmoid(values[6]) as f32,
            sh,
        };
        scene.push(g).map_err(|e| match e {
            Error::Data { message, .. } => Error::data(ctx, format!("Gaussian {index}: {message}")),
            other => other,
        })?;
    }
    Ok(scene)
}

/// Writes `scene` as PLY. Returns how many opacities had to be clamped
/// away from 0 or 1 to keep the logit finite.
pub fn save_ply(scene: &GaussianScene, path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let clamped = write_ply(scene, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    if clamped > 0 {
        tracing::warn!(clamped, path = %path.display(), "opacities clamped before logit");
    }
    Ok(clamped)
}

pub fn write_ply(scene: &GaussianScene, w: &mut impl Write) -> std::io::Result<usize> {
    let rest = 3 * (scene.coeffs_per_gaussian() - 1);
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", scene.len());
    for name in [
        "x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
    ] {
        header += &format!("property float {name}\n");
    }
    for i in 0..rest {
        header += &format!("property float f_rest_{i}\n");
    }
    for name in [
        "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
    ] {
        header += &format!("property float {name}\n");
    }
    header += "end_header\n";
    w.write_all(header.as_bytes())?;

    let mut clamped = 0;
    let mut record: Vec<f32> = Vec::with_capacity(17 + rest);
    for i in 0..scene.len() {
        record.clear();
        record.extend_from_slice(&scene.means()[i]);
        record.extend_from_slice(&[0.0; 3]);
        let sh = scene.sh(i);
        record.extend_from_slice(&sh[0]);
        for c in 0..3 {
            record.extend(sh[1..].iter().map(|coeff| coeff[c]));
        }
        let o = f64::from(scene.opacities()[i]);
        let oc = o.clamp(OPACITY_EPS, 1.0 - OPACITY_EPS);
        if oc != o {
            clamped += 1;
        }
        record.push(logit(oc) as f32);
        record.extend(scene.scales()[i].iter().map(|&s| f64::from(s).ln() as f32));
        record.extend_from_slice(&scene.rotations()[i]);
        for v in &record {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(clamped)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_only(props: &[&str], values: &[f32]) -> Vec<u8> {
        let mut out = String::from("ply\nformat binary_little_endian 1.0\nelement vertex 1\n");
        for p in props {
            out += &format!("property float {p}\n");
        }
        out += "end_header\n";
        let mut bytes = out.into_bytes();
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    const BASE: [&str; 14] = [
        "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
        "rot_0", "rot_1", "rot_2", "rot_3",
    ];

    #[test]
    fn activations_are_applied() {
        let bytes = header_only(
            &BASE,
            &[
                0.0, 0.0, 0.0, 0.1, 0.2, 0.3, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0,
            ],
        );
        let scene = read_ply(&mut bytes.as_slice(), "mem").unwrap();
        assert_eq!(scene.opacities()[0], 0.5);
        assert_eq!(scene.scales()[0], [1.0; 3]);
        assert_eq!(scene.rotations()[0], [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(scene.sh_degree(), 0);
    }

    #[test]
    fn degree_three_from_45_rest_properties() {
        let mut props: Vec<String> = BASE.iter().map(|s| s.to_string()).collect();
        props.extend((0..45).map(|i| format!("f_rest_{i}")));
        let props: Vec<&str> = props.iter().map(String::as_str).collect();
        let mut values = vec![0.0f32; 14 + 45];
        values[10] = 1.0;
        values[14] = 0.7; // red, coefficient 1
        values[14 + 15] = -0.3; // green, coefficient 1
        values[14 + 44] = 0.2; // blue, coefficient 15
        let scene = read_ply(&mut header_only(&props, &values).as_slice(), "mem").unwrap();
        assert_eq!(scene.sh_degree(), 3);
        assert_eq!(scene.sh(0).len(), 16);
        assert_eq!(scene.sh(0)[1], [0.7, -0.3, 0.0]);
        assert_eq!(scene.sh(0)[15], [0.0, 0.0, 0.2]);
    }

    #[test]
    fn missing_property_is_named() {
        for skip in 0..BASE.len() {
            let props: Vec<&str> = BASE
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, p)| *p)
                .collect();
            let values = vec![1.0f32; props.len()];
            let err = read_ply(&mut header_only(&props, &values).as_slice(), "mem").unwrap_err();
            assert!(matches!(err, Error::Format { .. }), "{err}");
            assert!(
                err.to_string().contains(&format!("'{}'", BASE[skip])),
                "{err}"
            );
        }
    }

    #[test]
    fn non_finite_value_names_gaussian() {
        let mut values = [0.0f32; 14];
        values[10] = 1.0;
        values[4] = f32::NAN;
        let err = read_ply(&mut header_only(&BASE, &values).as_slice(), "mem").unwrap_err();
        assert!(matches!(err, Error::Data { .. }));
        assert!(err.to_string().contains("Gaussian 0"), "{err}");
    }

    #[test]
    fn ascii_is_rejected() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(
            read_ply(&mut &text[..], "mem"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn saturated_opacity_is_clamped() {
        let scene = GaussianScene::from_gaussians(
            0,
            [
                Gaussian::isotropic([0.0; 3], 0.1, 1.0, [0.0; 3]),
                Gaussian::isotropic([0.0; 3], 0.1, 0.0, [0.0; 3]),
                Gaussian::isotropic([0.0; 3], 0.1, 0.3, [0.0; 3]),
            ],
        )
        .unwrap();
        let mut bytes = Vec::new();
        assert_eq!(write_ply(&scene, &mut bytes).unwrap(), 2);
        let back = read_ply(&mut bytes.as_slice(), "mem").unwrap();
        assert!((f64::from(back.opacities()[0]) - (1.0 - OPACITY_EPS)).abs() < 1e-7);
        assert!(back.opacities()[1] < 2e-6);
    }

    #[test]
    fn empty_scene_round_trips() {
        let scene = GaussianScene::new(1).unwrap();
        let mut bytes = Vec::new();
        write_ply(&scene, &mut bytes).unwrap();
        assert!(String::from_utf8_lossy(&bytes).contains("element vertex 0\n"));
        let back = read_ply(&mut bytes.as_slice(), "mem").unwrap();
        assert!(back.is_empty());
        assert_eq!(back.sh_degree(), 1);
    }
}
