//! NIfTI-1 and JSON file formats.

use std::path::Path;

use ndarray::{Array3, ShapeBuilder};
use nifti::{Endianness, IntoNdArray, NiftiHeader, NiftiObject, NiftiType, ReaderOptions};
use nifti::writer::WriterOptions;
use serde::Serialize;

use crate::error::IoError;
use crate::real::Real;
use crate::volume::{BrainMask, Grid, LabelVolume, ScalarVolume};

const XYZT_MM: u8 = 2;
const XFORM_SCANNER: i16 = 1;

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn format_err(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::Format {
        path: display(path),
        reason: reason.into(),
    }
}

fn nifti_err(path: &Path, source: nifti::NiftiError) -> IoError {
    IoError::Nifti {
        path: display(path),
        source,
    }
}

/// Grid described by a header. The sform is used when its code is set,
/// otherwise the axis-aligned spacing matrix.
pub fn grid_from_header(header: &NiftiHeader, path: &Path) -> Result<Grid, IoError> {
    let rank = header.dim[0] as usize;
    if !(1..=7).contains(&rank) {
        return Err(format_err(path, format!("invalid dimensionality {rank}")));
    }
    if header.dim[4..=rank.max(3)].iter().any(|&d| d > 1) {
        return Err(format_err(path, "expected a single 3-D volume"));
    }
    let dims = [1, 2, 3].map(|a| if a <= rank { header.dim[a] as usize } else { 1 });
    let spacing = [1, 2, 3].map(|a| {
        let p = header.pixdim[a].abs() as f64;
        if p > 0.0 { p } else { 1.0 }
    });
    let affine = if header.sform_code > 0 {
        [header.srow_x, header.srow_y, header.srow_z].map(|r| r.map(f64::from))
    } else {
        [
            [spacing[0], 0.0, 0.0, 0.0],
            [0.0, spacing[1], 0.0, 0.0],
            [0.0, 0.0, spacing[2], 0.0],
        ]
    };
    Ok(Grid::with_affine(dims, spacing, affine)?)
}

fn read_raw(path: &Path) -> Result<(Grid, Vec<f64>), IoError> {
    let obj = ReaderOptions::new()
        .read_file(path)
        .map_err(|e| nifti_err(path, e))?;
    let grid = grid_from_header(obj.header(), path)?;
    let arr = obj
        .into_volume()
        .into_ndarray::<f64>()
        .map_err(|e| nifti_err(path, e))?;
    if arr.len() != grid.len() {
        return Err(format_err(path, "voxel count does not match the header"));
    }
    let data: Vec<f64> = arr.t().iter().copied().collect();
    Ok((grid, data))
}

/// Reads a scalar image. The returned volume has a full brain mask; apply
/// the study mask with [`ScalarVolume::with_brain`].
pub fn read_scalar<T: Real>(path: impl AsRef<Path>) -> Result<ScalarVolume<T>, IoError> {
    let path = path.as_ref();
    let (grid, data) = read_raw(path)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(format_err(path, "image contains non-finite values"));
    }
    Ok(ScalarVolume::unmasked(grid, data.into_iter().map(T::lit).collect())?)
}

/// Reads a label image; every value must be a non-negative integer.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVolume, IoError> {
    let path = path.as_ref();
    let (grid, data) = read_raw(path)?;
    let labels = data
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) {
                Ok(v as u32)
            } else {
                Err(format_err(path, format!("non-integer or negative label {v}")))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabelVolume::new(grid, labels)?)
}

/// Brain mask stored as a label image (nonzero = brain).
pub fn read_mask(path: impl AsRef<Path>) -> Result<(Grid, BrainMask), IoError> {
    let labels = read_labels(path)?;
    let mask = BrainMask::new(labels.to_bools());
    Ok((labels.grid().clone(), mask))
}

fn header_for(grid: &Grid) -> NiftiHeader {
    let mut h = NiftiHeader {
        endianness: Endianness::Little,
        xyzt_units: XYZT_MM,
        qform_code: 0,
        sform_code: XFORM_SCANNER,
        ..NiftiHeader::default()
    };
    h.pixdim[1..4].copy_from_slice(&grid.spacing.map(|s| s as f32));
    let row = |r: [f64; 4]| r.map(|v| v as f32);
    h.srow_x = row(grid.affine[0]);
    h.srow_y = row(grid.affine[1]);
    h.srow_z = row(grid.affine[2]);
    h
}

fn fortran<A: Clone>(grid: &Grid, data: Vec<A>) -> Array3<A> {
    let [nx, ny, nz] = grid.dims;
    Array3::from_shape_vec((nx, ny, nz).f(), data).expect("data length matches grid")
}

/// Writes `.nii` or `.nii.gz` (chosen by extension) as float32.
pub fn write_scalar<T: Real>(path: impl AsRef<Path>, vol: &ScalarVolume<T>) -> Result<(), IoError> {
    let path = path.as_ref();
    let data: Vec<f32> = vol.data().iter().map(|v| v.as_f64() as f32).collect();
    let header = header_for(vol.grid());
    WriterOptions::new(path)
        .reference_header(&header)
        .write_nifti(&fortran(vol.grid(), data))
        .map_err(|e| nifti_err(path, e))
}

/// Writes labels as uint8 when every code fits, int16 otherwise.
pub fn write_labels(path: impl AsRef<Path>, vol: &LabelVolume) -> Result<(), IoError> {
    let path = path.as_ref();
    let header = header_for(vol.grid());
    let writer = WriterOptions::new(path).reference_header(&header);
    let max = vol.max_label();
    let res = if max <= u8::MAX as u32 {
        let data = vol.labels().iter().map(|&l| l as u8).collect();
        writer.write_nifti(&fortran(vol.grid(), data))
    } else if max <= i16::MAX as u32 {
        let data: Vec<i16> = vol.labels().iter().map(|&l| l as i16).collect();
        writer.write_nifti_with_type(&fortran(vol.grid(), data), NiftiType::Int16)
    } else {
        return Err(format_err(path, format!("label {max} exceeds the int16 range")));
    };
    res.map_err(|e| nifti_err(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize + ?Sized>(path: impl AsRef<Path>, value: &S) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Code table as a JSON object mapping codes to names.
pub fn write_codes_json(path: impl AsRef<Path>, table: &[(u32, &str)]) -> Result<(), IoError> {
    let map: serde_json::Map<String, serde_json::Value> = table
        .iter()
        .map(|(c, n)| (c.to_string(), serde_json::Value::String((*n).to_string())))
        .collect();
    write_json(path, &map)
}
