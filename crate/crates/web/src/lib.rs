//! Browser bindings: generate a synthetic specimen, run one of the pipelines
//! on it and read back slices, scores and the reconstructed growth path.

use foramtrace::metrics::{evaluate, EvalReport};
use foramtrace::ordering::{chamber_stats, growth_path, GrowthPath};
use foramtrace::pipelines::{run_pipeline, PipelineConfig, PipelineInput, PipelineKind};
use foramtrace::synth::{generate, Specimen, SynthSpec};
use foramtrace::LabelGrid;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    specimen: Specimen,
    order: Vec<u32>,
    pred: Option<LabelGrid>,
    path: Option<GrowthPath>,
}

fn js(e: impl ToString) -> JsError {
    JsError::new(&e.to_string())
}

/// Distinct, stable color per label; 0 is black.
fn label_color(l: u32) -> [u8; 3] {
    if l == 0 {
        return [0, 0, 0];
    }
    let h = (l as f64 * 0.618_033_988_75).fract() * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [r, g, b].map(|c: f64| (60.0 + 195.0 * c) as u8)
}

impl Demo {
    fn build(k: usize, seed: u64, noise_sigma: f64, blur_radius: u32) -> foramtrace::Result<Self> {
        let spec = SynthSpec {
            chamber_count: k,
            rng_seed: seed,
            noise_sigma,
            blur_radius,
            ..SynthSpec::default()
        };
        let specimen = generate(&spec)?;
        let order = specimen.chambers.iter().map(|c| c.id).collect();
        Ok(Self {
            specimen,
            order,
            pred: None,
            path: None,
        })
    }

    fn run(&mut self, kind: PipelineKind) -> foramtrace::Result<EvalReport> {
        let m = &self.specimen.maps;
        let input = PipelineInput {
            interior: Some(&m.interior),
            boundary: Some(&m.boundary),
            background: Some(&m.background),
        };
        let labels = run_pipeline(input, &PipelineConfig::new(kind))?.labels;
        let path = growth_path(&chamber_stats(&labels)?);
        let mut report = evaluate(&labels, &path, &self.specimen.gt, Some(&self.order))?;
        report.pipeline = Some(kind.name().to_string());
        self.pred = Some(labels);
        self.path = Some(path);
        Ok(report)
    }

    fn rgba(&self, layer: &str, z: usize) -> Result<Vec<u8>, String> {
        let dims = self.specimen.gt.dims();
        if z >= dims.nz {
            return Err(format!("slice {z} outside 0..{}", dims.nz));
        }
        let plane = dims.nx * dims.ny;
        let range = z * plane..(z + 1) * plane;
        let m = &self.specimen.maps;
        let byte = |p: f32| (p.clamp(0.0, 1.0) * 255.0).round() as u8;
        let pixels: Vec<[u8; 3]> = match layer {
            "maps" => range
                .map(|i| {
                    [
                        byte(m.boundary.data()[i]),
                        byte(m.interior.data()[i]),
                        byte(m.background.data()[i]),
                    ]
                })
                .collect(),
            "gt" => self.specimen.gt.data()[range].iter().map(|&l| label_color(l)).collect(),
            "pred" => match &self.pred {
                Some(p) => p.data()[range].iter().map(|&l| label_color(l)).collect(),
                None => return Err("run a pipeline first".into()),
            },
            other => return Err(format!("unknown layer {other:?}; expected maps, gt or pred")),
        };
        Ok(pixels.into_iter().flat_map(|[r, g, b]| [r, g, b, 255]).collect())
    }

    /// `[x, y, z, x, y, z, ...]` of the predicted path, or of the true
    /// chronological order before any pipeline has run.
    fn path_points(&self) -> Vec<f64> {
        match &self.path {
            Some(p) => p.steps.iter().flat_map(|s| s.chamber.centroid).collect(),
            None => self.specimen.chambers.iter().flat_map(|c| c.centroid).collect(),
        }
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(k: u32, seed: u32, noise_sigma: f64, blur_radius: u32) -> Result<Demo, JsError> {
        Self::build(k as usize, seed.into(), noise_sigma, blur_radius).map_err(js)
    }

    pub fn nx(&self) -> usize {
        self.specimen.gt.dims().nx
    }

    pub fn ny(&self) -> usize {
        self.specimen.gt.dims().ny
    }

    pub fn nz(&self) -> usize {
        self.specimen.gt.dims().nz
    }

    /// Runs `interior-sw`, `boundary-gasp` or `mtl-sw` and returns the
    /// evaluation report as JSON.
    pub fn segment(&mut self, pipeline: &str) -> Result<String, JsError> {
        let kind: PipelineKind = pipeline.parse().map_err(js)?;
        let report = self.run(kind).map_err(js)?;
        serde_json::to_string(&report).map_err(js)
    }

    /// RGBA bytes of slice `z`; `layer` is `maps`, `gt` or `pred`.
    pub fn slice_rgba(&self, layer: &str, z: usize) -> Result<Vec<u8>, JsError> {
        self.rgba(layer, z).map_err(js)
    }

    pub fn growth_path(&self) -> Vec<f64> {
        self.path_points()
    }
}
