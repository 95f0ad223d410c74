use crate::error::{Error, Result};
use crate::projection::RangeImage;

/// Normalized range residual `|r_cur − r_trans| / r_cur`, zero wherever
/// either operand is invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualImage {
    width: usize,
    height: usize,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl ResidualImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn range_residual(current: &RangeImage, transformed: &RangeImage) -> Result<ResidualImage> {
    if !current.same_shape(transformed.width(), transformed.height()) {
        return Err(Error::contract(format!(
            "residual operands differ in size: {}x{} vs {}x{}",
            current.width(),
            current.height(),
            transformed.width(),
            transformed.height()
        )));
    }
    let n = current.len();
    let mut values = vec![0.0f32; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        let cur = current.range()[i];
        if current.is_valid(i) && transformed.is_valid(i) && cur > 0.0 {
            let r = ((cur as f64 - transformed.range()[i] as f64).abs() / cur as f64) as f32;
            if r.is_finite() {
                values[i] = r;
                valid[i] = true;
            }
        }
    }
    Ok(ResidualImage {
        width: current.width(),
        height: current.height(),
        values,
        valid,
    })
}
