//! On-disk container: a JSON header `<name>.json` next to a raw
//! little-endian `f64` payload `<name>.f64le`, plus a lossy PGM export.
//!
//! Complex payloads are stored as interleaved `re, im` pairs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::AbelKernelMatrix;
use crate::model::{CartesianImage, HarmonicStack, PolarImage, VSinogram};

const DTYPE: &str = "f64le";
const ORDERING: &str = "row-major";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Image,
    Sinogram,
    Harmonics,
    Polar,
    Kernel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: Kind,
    pub dims: [usize; 2],
    #[serde(rename = "radius_R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Harmonic index, kernel matrices only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    pub dtype: String,
    pub ordering: String,
}

/// Any object that can be stored in a container.
#[derive(Clone, Debug, PartialEq)]
pub enum Container {
    Image(CartesianImage),
    Sinogram(VSinogram),
    Harmonics(HarmonicStack),
    Polar(PolarImage),
    Kernel(AbelKernelMatrix),
}

impl From<CartesianImage> for Container {
    fn from(v: CartesianImage) -> Self {
        Container::Image(v)
    }
}

impl From<VSinogram> for Container {
    fn from(v: VSinogram) -> Self {
        Container::Sinogram(v)
    }
}

impl From<HarmonicStack> for Container {
    fn from(v: HarmonicStack) -> Self {
        Container::Harmonics(v)
    }
}

impl From<PolarImage> for Container {
    fn from(v: PolarImage) -> Self {
        Container::Polar(v)
    }
}

impl From<AbelKernelMatrix> for Container {
    fn from(v: AbelKernelMatrix) -> Self {
        Container::Kernel(v)
    }
}

impl Container {
    pub fn kind(&self) -> Kind {
        match self {
            Container::Image(_) => Kind::Image,
            Container::Sinogram(_) => Kind::Sinogram,
            Container::Harmonics(_) => Kind::Harmonics,
            Container::Polar(_) => Kind::Polar,
            Container::Kernel(_) => Kind::Kernel,
        }
    }

    pub fn into_image(self) -> Result<CartesianImage> {
        match self {
            Container::Image(v) => Ok(v),
            other => Err(wrong_kind(Kind::Image, other.kind())),
        }
    }

    pub fn into_sinogram(self) -> Result<VSinogram> {
        match self {
            Container::Sinogram(v) => Ok(v),
            other => Err(wrong_kind(Kind::Sinogram, other.kind())),
        }
    }

    pub fn into_harmonics(self) -> Result<HarmonicStack> {
        match self {
            Container::Harmonics(v) => Ok(v),
            other => Err(wrong_kind(Kind::Harmonics, other.kind())),
        }
    }

    pub fn into_polar(self) -> Result<PolarImage> {
        match self {
            Container::Polar(v) => Ok(v),
            other => Err(wrong_kind(Kind::Polar, other.kind())),
        }
    }

    pub fn into_kernel(self) -> Result<AbelKernelMatrix> {
        match self {
            Container::Kernel(v) => Ok(v),
            other => Err(wrong_kind(Kind::Kernel, other.kind())),
        }
    }

    fn header_and_payload(&self) -> (Header, Vec<f64>) {
        let header = |kind, dims: (usize, usize), radius, mu, n| Header {
            kind,
            dims: [dims.0, dims.1],
            radius,
            mu,
            n,
            dtype: DTYPE.to_string(),
            ordering: ORDERING.to_string(),
        };
        match self {
            Container::Image(img) => (
                header(Kind::Image, img.values().dim(), Some(img.radius()), None, None),
                row_major(img.values()),
            ),
            Container::Sinogram(s) => (
                header(Kind::Sinogram, s.values().dim(), Some(s.radius()), Some(s.mu()), None),
                row_major(s.values()),
            ),
            Container::Harmonics(h) => {
                let payload = h.coeffs().iter().flat_map(|c| [c.re, c.im]).collect();
                (header(Kind::Harmonics, h.coeffs().dim(), None, None, None), payload)
            }
            Container::Polar(p) => (
                header(Kind::Polar, p.values().dim(), Some(p.radius()), None, None),
                row_major(p.values()),
            ),
            Container::Kernel(k) => (
                header(Kind::Kernel, k.entries().dim(), Some(k.radius()), Some(k.mu()), Some(k.n())),
                row_major(k.entries()),
            ),
        }
    }

    fn from_parts(header: &Header, payload: Vec<f64>) -> Result<Self> {
        let dims = (header.dims[0], header.dims[1]);
        let radius = || {
            header
                .radius
                .ok_or_else(|| Error::Format(format!("{:?} header lacks radius_R", header.kind)))
        };
        let mu = || {
            header
                .mu
                .ok_or_else(|| Error::Format(format!("{:?} header lacks mu", header.kind)))
        };
        let real = |payload: Vec<f64>| {
            Array2::from_shape_vec(dims, payload).map_err(|e| Error::Shape(e.to_string()))
        };
        Ok(match header.kind {
            Kind::Image => {
                let side = dims.0;
                if side != dims.1 || side % 2 == 0 {
                    return Err(Error::Shape(format!("image must be square of odd side, got {dims:?}")));
                }
                Container::Image(CartesianImage::new(side / 2, radius()?, real(payload)?)?)
            }
            Kind::Sinogram => Container::Sinogram(VSinogram::new(radius()?, mu()?, real(payload)?)?),
            Kind::Polar => Container::Polar(PolarImage::new(radius()?, real(payload)?)?),
            Kind::Harmonics => {
                let coeffs: Vec<Complex64> = payload
                    .chunks_exact(2)
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect();
                let coeffs =
                    Array2::from_shape_vec(dims, coeffs).map_err(|e| Error::Shape(e.to_string()))?;
                Container::Harmonics(HarmonicStack::new(coeffs)?)
            }
            Kind::Kernel => {
                let n = header
                    .n
                    .ok_or_else(|| Error::Format("kernel header lacks n".into()))?;
                Container::Kernel(AbelKernelMatrix::from_entries(n, mu()?, radius()?, real(payload)?)?)
            }
        })
    }
}

fn wrong_kind(want: Kind, got: Kind) -> Error {
    Error::Format(format!("expected a {want:?} container, found {got:?}"))
}

fn row_major(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

/// Header and payload paths for `path`, with any `.json` / `.f64le`
/// extension stripped first.
pub fn container_paths(path: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let path = path.as_ref();
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("f64le") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut json = stem.clone().into_os_string();
    json.push(".json");
    let mut data = stem.into_os_string();
    data.push(".f64le");
    (json.into(), data.into())
}

pub fn save_container(path: impl AsRef<Path>, object: &Container) -> Result<()> {
    let (json_path, data_path) = container_paths(path);
    let (header, payload) = object.header_and_payload();
    let mut bytes = Vec::with_capacity(payload.len() * 8);
    for v in &payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&json_path, serde_json::to_string_pretty(&header)?)?;
    fs::write(&data_path, bytes)?;
    Ok(())
}

pub fn load_header(path: impl AsRef<Path>) -> Result<Header> {
    let (json_path, _) = container_paths(path);
    let header: Header = serde_json::from_str(&fs::read_to_string(json_path)?)?;
    if header.dtype != DTYPE || header.ordering != ORDERING {
        return Err(Error::Format(format!(
            "unsupported layout dtype={} ordering={}",
            header.dtype, header.ordering
        )));
    }
    Ok(header)
}

pub fn load_container(path: impl AsRef<Path>) -> Result<Container> {
    let path = path.as_ref();
    let header = load_header(path)?;
    let (_, data_path) = container_paths(path);
    let bytes = fs::read(data_path)?;
    let per_entry = if header.kind == Kind::Harmonics { 2 } else { 1 };
    let expected = header.dims[0] * header.dims[1] * per_entry;
    if bytes.len() != expected * 8 {
        return Err(Error::Shape(format!(
            "header declares {}x{} ({} values) but payload holds {} bytes",
            header.dims[0],
            header.dims[1],
            expected,
            bytes.len()
        )));
    }
    let payload: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    if let Some(i) = payload.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite(i));
    }
    Container::from_parts(&header, payload)
}

/// Writes an 8-bit binary PGM, mapping `[min, max]` affinely to `[0, 255]`.
/// The `x` axis runs left to right and `y` bottom to top.
pub fn export_pgm(img: &CartesianImage, path: impl AsRef<Path>) -> Result<()> {
    let values = img.values();
    let side = img.side();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let mut out = Vec::with_capacity(side * side + 32);
    write!(out, "P5\n{side} {side}\n255\n")?;
    for row in 0..side {
        let b = side - 1 - row;
        for a in 0..side {
            let v = values[[a, b]];
            let level = if span > 0.0 { ((v - lo) / span * 255.0).round() } else { 0.0 };
            out.push(level.clamp(0.0, 255.0) as u8);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_strip_known_extensions() {
        let (j, d) = container_paths("out/sino.json");
        assert_eq!(j, PathBuf::from("out/sino.json"));
        assert_eq!(d, PathBuf::from("out/sino.f64le"));
        let (j, d) = container_paths("img");
        assert_eq!(j, PathBuf::from("img.json"));
        assert_eq!(d, PathBuf::from("img.f64le"));
        let (j, _) = container_paths("a.b");
        assert_eq!(j, PathBuf::from("a.b.json"));
    }

    #[test]
    fn sinogram_header_records_physics() {
        let dir = tempfile::tempdir().unwrap();
        let sino = VSinogram::new(8.0, 0.15, Array2::from_elem((4, 5), 1.5)).unwrap();
        let path = dir.path().join("sino");
        save_container(&path, &sino.clone().into()).unwrap();
        let header = load_header(&path).unwrap();
        assert_eq!(header.kind, Kind::Sinogram);
        assert_eq!(header.dims, [4, 5]);
        assert_eq!(header.radius, Some(8.0));
        assert_eq!(header.mu, Some(0.15));
        let text = fs::read_to_string(dir.path().join("sino.json")).unwrap();
        assert!(text.contains("\"radius_R\""));
        assert!(text.contains("\"f64le\""));
        assert_eq!(load_container(&path).unwrap().into_sinogram().unwrap(), sino);
    }

    #[test]
    fn truncated_payload_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sino");
        let sino = VSinogram::new(8.0, 0.15, Array2::from_elem((100, 100), 1.0)).unwrap();
        save_container(&path, &sino.into()).unwrap();
        let mut header = load_header(&path).unwrap();
        header.dims = [100, 101];
        fs::write(dir.path().join("sino.json"), serde_json::to_string(&header).unwrap()).unwrap();
        assert!(matches!(load_container(&path), Err(Error::Shape(_))));
    }

    #[test]
    fn nan_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img");
        let img = CartesianImage::zeros(2, 1.0).unwrap();
        save_container(&path, &img.into()).unwrap();
        let mut bytes = fs::read(dir.path().join("img.f64le")).unwrap();
        bytes[16..24].copy_from_slice(&f64::NAN.to_le_bytes());
        fs::write(dir.path().join("img.f64le"), bytes).unwrap();
        assert!(matches!(load_container(&path), Err(Error::NonFinite(2))));
    }

    #[test]
    fn wrong_kind_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img");
        save_container(&path, &CartesianImage::zeros(2, 1.0).unwrap().into()).unwrap();
        assert!(load_container(&path).unwrap().into_sinogram().is_err());
    }

    #[test]
    fn pgm_maps_extremes_to_full_range() {
        let dir = tempfile::tempdir().unwrap();
        let img = CartesianImage::from_fn(2, 10.0, |x, y| x + 2.0 * y).unwrap();
        let path = dir.path().join("img.pgm");
        export_pgm(&img, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n5 5\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let pixels = &bytes[header.len()..];
        assert_eq!(pixels.len(), 25);
        assert_eq!(*pixels.iter().min().unwrap(), 0);
        assert_eq!(*pixels.iter().max().unwrap(), 255);
        // top-right pixel is (x, y) = (10, 10), masked to zero; the top row
        // centre (0, 10) also lies on the circle
        assert_eq!(pixels[2], pixels[12]);
    }
}
