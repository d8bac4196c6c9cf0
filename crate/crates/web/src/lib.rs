//! WebAssembly bindings for the in-browser demo (`www/index.html`).

pub mod demo;

use wasm_bindgen::prelude::*;

use hypercs::Method;

fn js_err(e: hypercs::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Reconstruction(demo::BandReconstruction);

#[wasm_bindgen]
impl Reconstruction {
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.0.truth.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn recon(&self) -> Vec<f64> {
        self.0.recon.clone()
    }

    #[wasm_bindgen(getter, js_name = relError)]
    pub fn rel_error(&self) -> f64 {
        self.0.rel_error
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn measurements(&self) -> usize {
        self.0.measurements
    }
}

/// `method` is `"l1"` or `"tv"`.
#[wasm_bindgen(js_name = reconstructBand)]
pub fn reconstruct_band(method: &str, compression: f64, strength: f64, band: usize) -> Result<Reconstruction, JsError> {
    let method: Method = method.parse().map_err(js_err)?;
    demo::reconstruct_band(method, compression, strength, band).map(Reconstruction).map_err(js_err)
}

#[wasm_bindgen]
pub struct Detection(demo::FrameDetection);

#[wasm_bindgen]
impl Detection {
    #[wasm_bindgen(getter)]
    pub fn ace(&self) -> Vec<f64> {
        self.0.ace.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn bulk(&self) -> Vec<f64> {
        self.0.bulk.values.clone()
    }

    #[wasm_bindgen(getter, js_name = aceThreshold)]
    pub fn ace_threshold(&self) -> f64 {
        self.0.ace_threshold.t
    }

    #[wasm_bindgen(getter, js_name = bulkThreshold)]
    pub fn bulk_threshold(&self) -> f64 {
        self.0.bulk_threshold.t
    }

    /// Pixels above `multiplier * T`.
    pub fn count(&self, bulk: bool, multiplier: f64) -> usize {
        self.0.count(bulk, multiplier)
    }
}

#[wasm_bindgen]
pub fn detect(strength: f64) -> Result<Detection, JsError> {
    demo::detect(strength).map(Detection).map_err(js_err)
}

#[wasm_bindgen]
pub fn side() -> usize {
    demo::SIDE
}

#[wasm_bindgen]
pub fn bands() -> usize {
    demo::BANDS
}
