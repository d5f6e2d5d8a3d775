//! Training patch extraction with crop/flip/rotate augmentation, and the
//! on-disk patch directory (PNG rasters plus a tab-separated manifest).

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{load_image, save_image, ImageTensor, Plane};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Which augmentations may be drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmentations {
    pub crop: bool,
    pub flip: bool,
    pub rotate: bool,
}

impl Augmentations {
    pub const ALL: Augmentations = Augmentations {
        crop: true,
        flip: true,
        rotate: true,
    };
    pub const NONE: Augmentations = Augmentations {
        crop: false,
        flip: false,
        rotate: false,
    };
}

/// The transform applied to one patch after cropping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmentation {
    /// Counter-clockwise quarter turns, 0..=3.
    pub quarter_turns: u8,
    pub flip_h: bool,
    pub flip_v: bool,
}

impl Augmentation {
    pub fn apply(&self, patch: &Plane) -> Plane {
        let mut p = patch.clone();
        if self.flip_h {
            let (h, w) = p.dims();
            p = Plane::from_fn(h, w, |i, j| p.get(i, w - 1 - j));
        }
        if self.flip_v {
            let (h, w) = p.dims();
            p = Plane::from_fn(h, w, |i, j| p.get(h - 1 - i, j));
        }
        for _ in 0..self.quarter_turns % 4 {
            let (h, w) = p.dims();
            // counter-clockwise: out[i][j] = in[j][w-1-i]
            p = Plane::from_fn(w, h, |i, j| p.get(j, w - 1 - i));
        }
        p
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rot{}", u16::from(self.quarter_turns) * 90)?;
        if self.flip_h {
            f.write_str("+hflip")?;
        }
        if self.flip_v {
            f.write_str("+vflip")?;
        }
        Ok(())
    }
}

impl FromStr for Augmentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad augmentation `{s}`"));
        let mut parts = s.split('+');
        let rot = parts.next().and_then(|r| r.strip_prefix("rot")).ok_or_else(bad)?;
        let quarter_turns = match rot {
            "0" => 0,
            "90" => 1,
            "180" => 2,
            "270" => 3,
            _ => return Err(bad()),
        };
        let mut aug = Augmentation {
            quarter_turns,
            ..Default::default()
        };
        for p in parts {
            match p {
                "hflip" => aug.flip_h = true,
                "vflip" => aug.flip_v = true,
                _ => return Err(bad()),
            }
        }
        Ok(aug)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub image: ImageTensor,
    pub source: String,
    /// Top-left corner of the crop in the source image, `(row, col)`.
    pub offset: (usize, usize),
    pub augmentation: Augmentation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchSet {
    pub patch_size: usize,
    pub patches: Vec<Patch>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn images(&self) -> Vec<ImageTensor> {
        self.patches.iter().map(|p| p.image.clone()).collect()
    }

    /// Writes `patch_NNNNN.png` files and the manifest into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::new();
        for (k, p) in self.patches.iter().enumerate() {
            let file = format!("patch_{k:05}.png");
            save_image(&p.image, dir.join(&file))?;
            manifest.push_str(&format!(
                "{file}\t{}\t{},{}\t{}\n",
                p.source, p.offset.0, p.offset.1, p.augmentation
            ));
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<PatchSet> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut patches = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::Format(format!("{}:{}: {what}", path.display(), n + 1));
            let cols: Vec<&str> = line.split('\t').collect();
            let [file, source, offset, aug] = cols[..] else {
                return Err(bad("expected 4 tab-separated fields"));
            };
            let (r, c) = offset.split_once(',').ok_or_else(|| bad("bad offset"))?;
            let offset = (
                r.parse().map_err(|_| bad("bad offset row"))?,
                c.parse().map_err(|_| bad("bad offset col"))?,
            );
            patches.push(Patch {
                image: load_image(dir.join(file))?,
                source: source.to_string(),
                offset,
                augmentation: aug.parse()?,
            });
        }
        let patch_size = patches.first().map_or(0, |p| p.image.height());
        if let Some(p) = patches.iter().find(|p| p.image.dims() != (patch_size, patch_size)) {
            return Err(Error::Shape(format!(
                "patch from `{}` is {:?}, expected {patch_size}x{patch_size}",
                p.source,
                p.image.dims()
            )));
        }
        Ok(PatchSet { patch_size, patches })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchConfig {
    pub patch_size: usize,
    pub total: usize,
    pub augmentations: Augmentations,
    pub seed: u64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            patch_size: 160,
            total: 3200,
            augmentations: Augmentations::ALL,
            seed: 0,
        }
    }
}

/// Draws `cfg.total` square patches, cycling through the sources in order.
pub fn prepare_patches(images: &[(String, ImageTensor)], cfg: &PatchConfig) -> Result<PatchSet> {
    let size = cfg.patch_size;
    if size == 0 {
        return Err(Error::Config("patch size must be positive".into()));
    }
    for (name, img) in images {
        if img.height() < size || img.width() < size {
            return Err(Error::SourceTooSmall {
                name: name.clone(),
                height: img.height(),
                width: img.width(),
                patch: size,
            });
        }
    }
    if cfg.total == 0 {
        return Ok(PatchSet {
            patch_size: size,
            patches: Vec::new(),
        });
    }
    if images.is_empty() {
        return Err(Error::Config("no source images".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let aug = cfg.augmentations;
    let mut patches = Vec::with_capacity(cfg.total);
    for k in 0..cfg.total {
        let (name, img) = &images[k % images.len()];
        let (max_r, max_c) = (img.height() - size, img.width() - size);
        let offset = if aug.crop {
            (rng.random_range(0..=max_r), rng.random_range(0..=max_c))
        } else {
            (max_r / 2, max_c / 2)
        };
        let augmentation = Augmentation {
            quarter_turns: if aug.rotate { rng.random_range(0..4) } else { 0 },
            flip_h: aug.flip && rng.random_bool(0.5),
            flip_v: aug.flip && rng.random_bool(0.5),
        };
        let crop = Plane::from_fn(size, size, |i, j| img.get(offset.0 + i, offset.1 + j));
        patches.push(Patch {
            image: ImageTensor::new(augmentation.apply(&crop))?,
            source: name.clone(),
            offset,
            augmentation,
        });
    }
    Ok(PatchSet {
        patch_size: size,
        patches,
    })
}
