//! Model checkpoints: a text header that says how to rebuild the model,
//! followed by one binary record per parameter tensor.
//!
//! The header carries the architecture tag, configuration dimension,
//! dropout keep rate, initialization seed, patch settings and a
//! descriptive layer list with hyperparameters. Each parameter record is
//! a text line (`param <name> <rank> <dims…>`) followed by the values as
//! little-endian IEEE-754 32-bit floats in row-major order. Loading
//! rebuilds the network from the header and overwrites every parameter,
//! so a round trip reproduces eval-mode outputs to within float32
//! quantization — and exactly once the weights have been quantized.
//! Saves go through a sibling `.partial` file and a rename, so an
//! interrupted write never leaves a truncated checkpoint behind.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::patches::{Interp, PatchMode};
use crate::zoo::ArchKind;

pub const MAGIC: &str = "graspgrad-checkpoint v1";

/// Serialize `model` to a writer.
pub fn write_to<W: Write>(model: &Model, w: &mut W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "arch {}", model.arch().tag())?;
    writeln!(w, "theta_dim {}", model.theta_dim())?;
    writeln!(w, "dropout_keep {}", model.dropout_keep())?;
    writeln!(w, "seed {}", model.init_seed())?;
    writeln!(w, "patch_mode {}", model.patch_mode().tag())?;
    writeln!(w, "interp {}", model.interp().tag())?;
    for node in model.graph().nodes() {
        let s = node.out_shape;
        writeln!(
            w,
            "layer {} {}x{}x{} {:?}",
            node.name, s.channels, s.height, s.width, node.kind
        )?;
    }
    writeln!(w, "params {}", model.graph().params().len())?;
    writeln!(w, "end-header")?;
    for param in model.graph().params() {
        write!(w, "param {} {}", param.name, param.dims.len())?;
        for d in &param.dims {
            write!(w, " {d}")?;
        }
        writeln!(w)?;
        for &v in &param.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Write atomically: serialize to a sibling temp file, then rename.
pub fn save(model: &Model, path: &Path) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        write_to(model, &mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_line<R: Read>(r: &mut R, what: &str) -> Result<String> {
    // byte-by-byte so the binary payload position stays exact
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = r.read(&mut byte)?;
        if n == 0 {
            return Err(Error::Format(format!("checkpoint ended inside {what}")));
        }
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
    }
    String::from_utf8(line).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
}

fn header_value<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Format(format!("expected `{key} …`, found `{line}`")))
}

/// Deserialize a model from a reader.
pub fn read_from<R: Read>(mut r: R) -> Result<Model> {
    if read_line(&mut r, "the magic line")? != MAGIC {
        return Err(Error::Format(format!("not a checkpoint file (expected `{MAGIC}`)")));
    }
    let arch = ArchKind::from_tag(header_value(&read_line(&mut r, "the header")?, "arch")?)?;
    let theta_dim: usize = parse(header_value(&read_line(&mut r, "the header")?, "theta_dim")?)?;
    let dropout_keep: f64 =
        parse(header_value(&read_line(&mut r, "the header")?, "dropout_keep")?)?;
    let seed: u64 = parse(header_value(&read_line(&mut r, "the header")?, "seed")?)?;
    let patch_mode =
        PatchMode::from_tag(header_value(&read_line(&mut r, "the header")?, "patch_mode")?)?;
    let interp = Interp::from_tag(header_value(&read_line(&mut r, "the header")?, "interp")?)?;
    let mut params_declared: Option<usize> = None;
    loop {
        let line = read_line(&mut r, "the header")?;
        if line == "end-header" {
            break;
        }
        if line.starts_with("layer ") {
            continue; // descriptive only; the arch tag rebuilds the graph
        }
        if let Ok(v) = header_value(&line, "params") {
            params_declared = Some(parse(v)?);
            continue;
        }
        return Err(Error::Format(format!("unexpected header line `{line}`")));
    }
    let params_declared = params_declared
        .ok_or_else(|| Error::Format("checkpoint header lacks a params count".into()))?;

    let mut model = Model::new(arch, theta_dim, dropout_keep, seed, patch_mode, interp)?;
    if model.graph().params().len() != params_declared {
        return Err(Error::Format(format!(
            "checkpoint declares {params_declared} parameter tensors but {} has {}",
            arch.tag(),
            model.graph().params().len()
        )));
    }
    let mut filled = vec![false; params_declared];
    for _ in 0..params_declared {
        let line = read_line(&mut r, "a parameter record")?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some("param") {
            return Err(Error::Format(format!("expected `param …`, found `{line}`")));
        }
        let name = parts
            .next()
            .ok_or_else(|| Error::Format("parameter record lacks a name".into()))?
            .to_string();
        let rank: usize =
            parse(parts.next().ok_or_else(|| {
                Error::Format(format!("parameter `{name}` lacks a rank"))
            })?)?;
        let dims: Vec<usize> = parts.map(parse).collect::<Result<_>>()?;
        if dims.len() != rank {
            return Err(Error::Format(format!(
                "parameter `{name}` declares rank {rank} but lists {} dims",
                dims.len()
            )));
        }
        let index = model
            .graph()
            .params()
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| {
                Error::Format(format!("{} has no parameter `{name}`", arch.tag()))
            })?;
        if filled[index] {
            return Err(Error::Format(format!("duplicate record for parameter `{name}`")));
        }
        let expected = &model.graph().params()[index];
        if expected.dims != dims {
            return Err(Error::Format(format!(
                "parameter `{name}` has dims {dims:?} but the network expects {:?}",
                expected.dims
            )));
        }
        let len = expected.len();
        let mut payload = vec![0u8; len * 4];
        r.read_exact(&mut payload).map_err(|_| {
            Error::Format(format!("checkpoint ended inside the values of `{name}`"))
        })?;
        let values: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value in parameter `{name}`")));
        }
        model.graph_mut().params_mut()[index].values = values;
        filled[index] = true;
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after the last parameter".into()));
    }
    Ok(model)
}

pub fn load(path: &Path) -> Result<Model> {
    read_from(fs::File::open(path)?)
}

fn parse<T: std::str::FromStr>(text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::Format(format!("unparsable checkpoint field `{text}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::{GraspConfig, THETA_DIM};
    use crate::world::{generate_scene, WorldParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(arch: ArchKind, patch_mode: PatchMode, interp: Interp) -> Model {
        Model::new(arch, THETA_DIM, 0.75, 42, patch_mode, interp).unwrap()
    }

    fn bytes_of(model: &Model) -> Vec<u8> {
        let mut buf = Vec::new();
        write_to(model, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_quantizes_once_then_is_exact() {
        let original = model(ArchKind::ConfigNet, PatchMode::Fixed, Interp::Bilinear);
        let first = bytes_of(&original);
        let loaded = read_from(first.as_slice()).unwrap();
        for (a, b) in original.graph().params().iter().zip(loaded.graph().params()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.dims, b.dims);
            for (&x, &y) in a.values.iter().zip(&b.values) {
                assert_eq!(y, (x as f32) as f64, "load must be exactly the f32 quantization");
            }
        }
        // once quantized, a second trip is the identity
        let second = bytes_of(&loaded);
        assert_eq!(first, second);
        let reloaded = read_from(second.as_slice()).unwrap();
        for (a, b) in loaded.graph().params().iter().zip(reloaded.graph().params()) {
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn round_trip_predictions_match_within_quantization() {
        let original = model(ArchKind::PatchNet, PatchMode::PalmTracked, Interp::Bilinear);
        let loaded = read_from(bytes_of(&original).as_slice()).unwrap();
        assert_eq!(loaded.arch(), original.arch());
        assert_eq!(loaded.patch_mode(), original.patch_mode());
        assert_eq!(loaded.interp(), original.interp());
        assert_eq!(loaded.dropout_keep(), original.dropout_keep());
        assert_eq!(loaded.init_seed(), original.init_seed());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ws_a = original.graph().workspace();
        let mut ws_b = loaded.graph().workspace();
        for _ in 0..5 {
            let family = rng.gen_range(0..crate::world::FAMILY_POOL);
            let shape = generate_scene(&mut rng, family);
            let obs = shape.render();
            let theta = GraspConfig::parallel_jaw(
                0.3 + 0.4 * rng.gen::<f64>(),
                0.3 + 0.4 * rng.gen::<f64>(),
                rng.gen::<f64>() - 0.5,
                0.05 + 0.1 * rng.gen::<f64>(),
            );
            let a = original.predict(&mut ws_a, &obs, &theta).unwrap();
            let b = loaded.predict(&mut ws_b, &obs, &theta).unwrap();
            assert!((a - b).abs() < 1e-5, "prediction drifted: {a} vs {b}");
        }
    }

    #[test]
    fn regression_checkpoint_round_trips() {
        let original = model(ArchKind::RegressionNet, PatchMode::Fixed, Interp::Bilinear);
        let loaded = read_from(bytes_of(&original).as_slice()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = generate_scene(&mut rng, 7);
        let obs = shape.render();
        let mut ws_a = original.graph().workspace();
        let mut ws_b = loaded.graph().workspace();
        let a = original.predict_theta(&mut ws_a, &obs).unwrap();
        let b = loaded.predict_theta(&mut ws_b, &obs).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let m = model(ArchKind::ConfigNet, PatchMode::Fixed, Interp::Bilinear);
        let good = bytes_of(&m);
        assert!(read_from(good.as_slice()).is_ok());

        let mut wrong_magic = good.clone();
        wrong_magic[0] = b'x';
        assert!(read_from(wrong_magic.as_slice()).is_err());

        let truncated = &good[..good.len() - 2];
        let err = read_from(truncated).unwrap_err().to_string();
        assert!(err.contains("ended inside the values"), "{err}");

        let text = String::from_utf8_lossy(&good[..200]).into_owned();
        assert!(text.contains("arch config-net"));
        let bad_arch: Vec<u8> = {
            let mut v = good.clone();
            let pos = find(&v, b"arch config-net").unwrap();
            v.splice(pos..pos + b"arch config-net".len(), b"arch mystery-net".iter().copied());
            v
        };
        let err = read_from(bad_arch.as_slice()).unwrap_err().to_string();
        assert!(err.contains("unknown architecture"), "{err}");

        let trailing: Vec<u8> = good.iter().copied().chain([0u8]).collect();
        let err = read_from(trailing.as_slice()).unwrap_err().to_string();
        assert!(err.contains("trailing"), "{err}");

        // renaming a parameter leaves the original unfilled and is caught
        // by name lookup
        let renamed: Vec<u8> = {
            let mut v = good.clone();
            let pos = find(&v, b"param img_conv1.weight").unwrap();
            v.splice(pos..pos + b"param img_conv1.weight".len(), b"param img_conv9.weight".iter().copied());
            v
        };
        let err = read_from(renamed.as_slice()).unwrap_err().to_string();
        assert!(err.contains("no parameter"), "{err}");
    }

    #[test]
    fn save_is_atomic_and_loadable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let m = model(ArchKind::ConfigNet, PatchMode::Fixed, Interp::Bilinear);
        save(&m, &path).unwrap();
        assert!(path.exists());
        assert!(!path.with_extension("partial").exists(), "temp file must be renamed away");
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.graph().param_count(), m.graph().param_count());
        assert!(load(&dir.path().join("absent.ckpt")).is_err());
    }

    fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
        haystack.windows(needle.len()).position(|w| w == needle)
    }
}
