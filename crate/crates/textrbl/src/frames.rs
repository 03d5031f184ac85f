//! PNG frame sequences on disk.
//!
//! A video is a directory of 8-bit PNG stills with numeric names
//! (`000001.png`, `000002.png`, ...), ordered by number. Grayscale images
//! load as one channel, everything else as RGB.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, ImageReader};
use textrbl_core::pipeline::VideoSource;
use textrbl_core::Frame;

use crate::error::{Error, Result};

/// File name for 0-based frame `index`.
pub fn frame_file_name(index: usize) -> String {
    format!("{:06}.png", index + 1)
}

/// Parses `A:B` (1-based, inclusive).
pub fn parse_trim(s: &str) -> Result<[u32; 2]> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Usage(format!("trim {s:?} is not of the form A:B")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<u32>()
            .map_err(|_| Error::Usage(format!("trim bound {v:?} is not a frame number")))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a == 0 || b < a {
        return Err(Error::Usage(format!("trim {a}:{b} must satisfy 1 <= A <= B")));
    }
    Ok([a, b])
}

#[derive(Debug, Clone)]
pub struct FrameDir {
    dir: PathBuf,
    name: String,
    paths: Vec<PathBuf>,
    width: usize,
    height: usize,
    trim: Option<[u32; 2]>,
}

impl FrameDir {
    /// Lists the sequence and checks that every frame shares the geometry
    /// of the first one. Only image headers are read.
    pub fn open(dir: impl AsRef<Path>, trim: Option<[u32; 2]>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let mut numbered = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
            let number = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<u64>().ok());
            if let (true, Some(n)) = (is_png, number) {
                numbered.push((n, path));
            }
        }
        numbered.sort();
        let mut paths: Vec<PathBuf> = numbered.into_iter().map(|(_, p)| p).collect();
        if let Some([a, b]) = trim {
            if b as usize > paths.len() {
                return Err(Error::Usage(format!(
                    "trim {a}:{b} exceeds the {} frames in {}",
                    paths.len(),
                    dir.display()
                )));
            }
            paths = paths[a as usize - 1..b as usize].to_vec();
        }
        if paths.is_empty() {
            return Err(Error::EmptyVideo(dir));
        }
        let dims = |p: &Path| -> Result<(usize, usize)> {
            let reader = ImageReader::open(p).map_err(|e| Error::io(p, e))?;
            let (w, h) = reader.into_dimensions().map_err(|source| Error::Image {
                path: p.to_path_buf(),
                source,
            })?;
            Ok((w as usize, h as usize))
        };
        let (width, height) = dims(&paths[0])?;
        for (index, p) in paths.iter().enumerate().skip(1) {
            let (w, h) = dims(p)?;
            if (w, h) != (width, height) {
                return Err(textrbl_core::Error::Frame {
                    index,
                    message: format!("{} is {w}x{h}, frame 0 is {width}x{height}", p.display()),
                }
                .into());
            }
        }
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into());
        Ok(Self {
            dir,
            name,
            paths,
            width,
            height,
            trim,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, index: usize) -> Option<&Path> {
        self.paths.get(index).map(PathBuf::as_path)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Decodes every frame into memory.
    pub fn load_all(&self) -> Result<Vec<Frame>> {
        (0..self.paths.len()).map(|i| self.load(i)).collect()
    }

    pub fn load(&self, index: usize) -> Result<Frame> {
        let path = self.paths.get(index).ok_or(textrbl_core::Error::Frame {
            index,
            message: format!("index out of range for {} frames", self.paths.len()),
        })?;
        let frame = read_png(path, index)?;
        if frame.dims() != (self.width, self.height) {
            return Err(textrbl_core::Error::Frame {
                index,
                message: format!("{} changed geometry since the sequence was opened", path.display()),
            }
            .into());
        }
        Ok(frame)
    }
}

impl VideoSource for FrameDir {
    fn name(&self) -> &str {
        &self.name
    }

    fn frame_count(&self) -> usize {
        self.paths.len()
    }

    fn geometry(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn trim(&self) -> Option<[u32; 2]> {
        self.trim
    }

    fn frame(&self, index: usize) -> textrbl_core::Result<Frame> {
        self.load(index).map_err(|e| match e {
            Error::Core(c) => c,
            other => textrbl_core::Error::Frame {
                index,
                message: other.to_string(),
            },
        })
    }
}

pub fn read_png(path: &Path, index: usize) -> Result<Frame> {
    let image = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    let (w, h) = (image.width() as usize, image.height() as usize);
    let gray = matches!(
        image.color(),
        ColorType::L8 | ColorType::L16 | ColorType::La8 | ColorType::La16
    );
    let frame = if gray {
        Frame::from_u8(index, w, h, 1, image.to_luma8().as_raw())?
    } else {
        Frame::from_u8(index, w, h, 3, image.to_rgb8().as_raw())?
    };
    Ok(frame)
}

pub fn write_png(path: &Path, frame: &Frame) -> Result<()> {
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let bytes = frame.to_u8();
    let image = if frame.channels() == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, bytes).expect("buffer matches geometry"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, bytes).expect("buffer matches geometry"))
    };
    image.save_with_format(path, image::ImageFormat::Png).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `frames` as `000001.png`, ... into `dir`, creating it if needed.
pub fn write_frames(dir: &Path, frames: &[Frame]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in frames.iter().enumerate() {
        write_png(&dir.join(frame_file_name(i)), frame)?;
    }
    Ok(())
}
