//! Procedural stereo scenes. A scene is a back-to-front stack of textured
//! layers; each layer has an integer HR disparity and nearer layers shift
//! more. The right view samples every layer at `x + d`, so a point at left
//! column `x` appears at right column `x - d`.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::Rng;

use super::{bicubic_downsample, save_png, Manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng as StreamRng};
use crate::tensor::{Array4, Shape};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub count: usize,
    /// HR `(height, width)`.
    pub size: (usize, usize),
    pub scale: usize,
    pub max_disparity: usize,
    /// Highest texture frequency, in cycles per HR pixel.
    pub max_frequency: f64,
    /// Foreground layers per scene, drawn from this inclusive range.
    pub layers: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            count: 8,
            size: (64, 192),
            scale: 2,
            max_disparity: 16,
            max_frequency: 0.25,
            layers: (2, 4),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.size;
        if self.scale == 0 || h % self.scale != 0 || w % self.scale != 0 {
            return Err(Error::Config(format!("size {h}x{w} not divisible by scale {}", self.scale)));
        }
        if 4 * self.max_disparity >= w {
            return Err(Error::Config(format!(
                "max disparity {} must be below a quarter of the width {w}",
                self.max_disparity
            )));
        }
        if self.layers.0 > self.layers.1 || !(self.max_frequency > 0.0 && self.max_frequency <= 0.5) {
            return Err(Error::Config("invalid layer range or frequency".into()));
        }
        Ok(())
    }
}

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: [f64; 3],
}

struct Texture {
    base: [f64; 3],
    waves: Vec<Wave>,
}

impl Texture {
    fn random(rng: &mut StreamRng, max_freq: f64) -> Self {
        let base = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
        let waves = (0..rng.gen_range(2..5))
            .map(|_| {
                let f = rng.gen_range(0.02..max_freq);
                let theta = rng.gen_range(0.0..TAU / 2.0);
                let strength = rng.gen_range(0.05..0.2);
                Wave {
                    fx: f * theta.cos(),
                    fy: f * theta.sin(),
                    phase: rng.gen_range(0.0..TAU),
                    amp: [0, 1, 2].map(|_| strength * rng.gen_range(0.3..1.0)),
                }
            })
            .collect();
        Texture { base, waves }
    }

    fn at(&self, y: f64, x: f64, c: usize) -> f64 {
        self.base[c]
            + self
                .waves
                .iter()
                .map(|w| w.amp[c] * (TAU * (w.fx * x + w.fy * y) + w.phase).sin())
                .sum::<f64>()
    }
}

enum Shape2 {
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64 },
    Rect { y0: f64, x0: f64, y1: f64, x1: f64 },
}

impl Shape2 {
    /// Coverage in [0, 1] with a one-pixel soft edge.
    fn coverage(&self, y: f64, x: f64) -> f64 {
        let signed = match *self {
            Shape2::Ellipse { cy, cx, ry, rx } => {
                let r = (((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2)).sqrt();
                (1.0 - r) * ry.min(rx)
            }
            Shape2::Rect { y0, x0, y1, x1 } => (y - y0).min(y1 - y).min(x - x0).min(x1 - x),
        };
        (signed + 0.5).clamp(0.0, 1.0)
    }
}

struct Layer {
    shape: Option<Shape2>,
    texture: Texture,
    disparity: usize,
}

/// An HR stereo pair with its per-layer disparities (back to front).
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub left: Array4<f32>,
    pub right: Array4<f32>,
    pub disparities: Vec<usize>,
}

fn build_layers(cfg: &SynthConfig, index: u64) -> Vec<Layer> {
    let mut rng = stream(cfg.seed, "scene", index);
    let (h, w) = (cfg.size.0 as f64, cfg.size.1 as f64);
    let n_fg = rng.gen_range(cfg.layers.0..=cfg.layers.1);
    let mut disp: Vec<usize> = (0..=n_fg).map(|_| rng.gen_range(0..=cfg.max_disparity)).collect();
    disp.sort_unstable();
    let mut layers = vec![Layer {
        shape: None,
        texture: Texture::random(&mut rng, cfg.max_frequency),
        disparity: disp[0],
    }];
    for &d in &disp[1..] {
        let shape = if rng.gen_bool(0.5) {
            Shape2::Ellipse {
                cy: rng.gen_range(0.0..h),
                cx: rng.gen_range(0.0..w),
                ry: rng.gen_range(0.15..0.4) * h,
                rx: rng.gen_range(0.05..0.2) * w,
            }
        } else {
            let (cy, cx) = (rng.gen_range(0.0..h), rng.gen_range(0.0..w));
            let (hh, hw) = (rng.gen_range(0.1..0.35) * h, rng.gen_range(0.04..0.15) * w);
            Shape2::Rect {
                y0: cy - hh,
                x0: cx - hw,
                y1: cy + hh,
                x1: cx + hw,
            }
        };
        layers.push(Layer {
            shape: Some(shape),
            texture: Texture::random(&mut rng, cfg.max_frequency),
            disparity: d,
        });
    }
    layers
}

fn render_view(layers: &[Layer], h: usize, w: usize, right: bool) -> Array4<f32> {
    let mut img = Array4::zeros(Shape::new(1, 3, h, w));
    for y in 0..h {
        for x in 0..w {
            let mut px = [0.0f64; 3];
            for layer in layers {
                let sx = x as f64 + if right { layer.disparity as f64 } else { 0.0 };
                let a = layer.shape.as_ref().map_or(1.0, |s| s.coverage(y as f64, sx));
                if a == 0.0 {
                    continue;
                }
                for (c, p) in px.iter_mut().enumerate() {
                    *p = *p * (1.0 - a) + layer.texture.at(y as f64, sx, c) * a;
                }
            }
            for (c, p) in px.iter().enumerate() {
                img.set(0, c, y, x, p.clamp(0.0, 1.0) as f32);
            }
        }
    }
    img
}

/// Render scene `index` of the dataset described by `cfg`.
pub fn render_scene(cfg: &SynthConfig, index: u64) -> Result<Scene> {
    cfg.validate()?;
    let layers = build_layers(cfg, index);
    let (h, w) = cfg.size;
    Ok(Scene {
        left: render_view(&layers, h, w, false),
        right: render_view(&layers, h, w, true),
        disparities: layers.iter().map(|l| l.disparity).collect(),
    })
}

/// Write `cfg.count` scenes as HR/LR PNG pairs plus `manifest.txt`.
pub fn synth_stereo(cfg: &SynthConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let scene = render_scene(cfg, i as u64)?;
        let lr_l = bicubic_downsample(&scene.left, cfg.scale)?;
        let lr_r = bicubic_downsample(&scene.right, cfg.scale)?;
        let name = |kind: &str| format!("{i:04}_{kind}.png");
        for (kind, img) in [("lr_l", &lr_l), ("lr_r", &lr_r), ("hr_l", &scene.left), ("hr_r", &scene.right)] {
            save_png(&dir.join(name(kind)), img)?;
        }
        entries.push(ManifestEntry {
            lr_l: name("lr_l").into(),
            lr_r: name("lr_r").into(),
            hr_l: name("hr_l").into(),
            hr_r: name("hr_r").into(),
            scale: cfg.scale,
            disparities: scene.disparities,
        });
    }
    let manifest = Manifest {
        root: dir.to_path_buf(),
        entries,
    };
    manifest.save(&dir.join("manifest.txt"))?;
    Ok(manifest)
}
