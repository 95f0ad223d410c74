//! WebAssembly bindings for the range-image demo page.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// RGBA pixels of the street scan's range image.
#[wasm_bindgen(js_name = rangeView)]
pub fn range_view(
    width: usize,
    height: usize,
    fov_up: f64,
    fov_down: f64,
) -> Result<Vec<u8>, JsError> {
    demo::range_view(width, height, fov_up, fov_down).map_err(js)
}

/// RGBA pixels of the street scan reprojected under a sensor motion.
#[wasm_bindgen(js_name = associationView)]
pub fn association_view(
    width: usize,
    height: usize,
    dx: f64,
    dy: f64,
    yaw_deg: f64,
) -> Result<Vec<u8>, JsError> {
    demo::association_view(width, height, dx, dy, yaw_deg).map_err(js)
}

#[wasm_bindgen]
pub struct Segmentation {
    rgba: Vec<u8>,
    iou: Option<f64>,
    moving_points: usize,
}

#[wasm_bindgen]
impl Segmentation {
    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    /// Moving IoU, or NaN when undefined.
    #[wasm_bindgen(getter)]
    pub fn iou(&self) -> f64 {
        self.iou.unwrap_or(f64::NAN)
    }

    #[wasm_bindgen(getter, js_name = movingPoints)]
    pub fn moving_points(&self) -> usize {
        self.moving_points
    }
}

#[wasm_bindgen(js_name = segmentView)]
pub fn segment_view(
    width: usize,
    height: usize,
    car_speed: f64,
    pose_noise: f64,
    use_knn: bool,
    seed: u64,
) -> Result<Segmentation, JsError> {
    let out =
        demo::segment_view(width, height, car_speed, pose_noise, use_knn, seed).map_err(js)?;
    Ok(Segmentation {
        rgba: out.rgba,
        iou: out.iou,
        moving_points: out.moving_points,
    })
}

#[wasm_bindgen(js_name = streetStep)]
pub fn street_step() -> Result<f64, JsError> {
    demo::street_step().map_err(js)
}
