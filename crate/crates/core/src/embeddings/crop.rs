use std::path::Path;

use image::{imageops, RgbImage};

use crate::error::{Error, Result};

/// An RGB face region ready for an embedding network.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceCrop {
    pub pixels: RgbImage,
    pub source_ref: String,
}

impl FaceCrop {
    pub fn new(pixels: RgbImage, source_ref: impl Into<String>) -> Result<Self> {
        let source_ref = source_ref.into();
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(Error::NoFace(source_ref));
        }
        Ok(Self { pixels, source_ref })
    }
}

/// Axis-aligned face box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    pub confidence: f32,
}

/// A face detector wrapped behind the crop stage (e.g. an MTCNN binding).
pub trait FaceDetector: Send + Sync {
    fn detect(&self, image: &RgbImage) -> Result<Vec<Detection>>;
}

pub enum CropStage {
    /// Inputs are already face crops.
    Passthrough,
    Detector(Box<dyn FaceDetector>),
}

impl std::fmt::Debug for CropStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CropStage::Passthrough => f.write_str("Passthrough"),
            CropStage::Detector(_) => f.write_str("Detector"),
        }
    }
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(img.to_rgb8())
}

/// Crops the detector's highest-confidence face, or passes the image through.
pub fn crop_face(stage: &CropStage, image: RgbImage, source_ref: &str) -> Result<FaceCrop> {
    match stage {
        CropStage::Passthrough => FaceCrop::new(image, source_ref),
        CropStage::Detector(detector) => {
            let detections = detector.detect(&image)?;
            // First detection wins confidence ties.
            let best = detections
                .iter()
                .filter(|d| d.confidence.is_finite())
                .fold(None::<&Detection>, |best, d| match best {
                    Some(b) if b.confidence >= d.confidence => Some(b),
                    _ => Some(d),
                })
                .ok_or_else(|| Error::NoFace(source_ref.to_string()))?;
            let x = best.x.min(image.width());
            let y = best.y.min(image.height());
            let w = best.width.min(image.width() - x);
            let h = best.height.min(image.height() - y);
            let region = imageops::crop_imm(&image, x, y, w, h).to_image();
            FaceCrop::new(region, source_ref)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    struct FixedDetector(Vec<Detection>);

    impl FaceDetector for FixedDetector {
        fn detect(&self, _image: &RgbImage) -> Result<Vec<Detection>> {
            Ok(self.0.clone())
        }
    }

    fn det(x: u32, y: u32, confidence: f32) -> Detection {
        Detection {
            x,
            y,
            width: 4,
            height: 4,
            confidence,
        }
    }

    fn test_image() -> RgbImage {
        RgbImage::from_fn(16, 8, |x, y| Rgb([x as u8 * 10, y as u8 * 20, 7]))
    }

    #[test]
    fn passthrough_is_identity() {
        let img = test_image();
        let crop = crop_face(&CropStage::Passthrough, img.clone(), "a.png").unwrap();
        assert_eq!(crop.pixels, img);
    }

    #[test]
    fn no_face_is_an_error() {
        let stage = CropStage::Detector(Box::new(FixedDetector(vec![])));
        let err = crop_face(&stage, test_image(), "a.png").unwrap_err();
        assert!(err.to_string().contains("no face"));
    }

    #[test]
    fn two_faces_pick_top_confidence() {
        let faces = vec![det(0, 0, 0.7), det(10, 2, 0.95)];
        let stage = CropStage::Detector(Box::new(FixedDetector(faces)));
        let img = test_image();
        let crop = crop_face(&stage, img.clone(), "a.png").unwrap();
        assert_eq!(crop.pixels.dimensions(), (4, 4));
        assert_eq!(crop.pixels.get_pixel(0, 0), img.get_pixel(10, 2));
    }

    #[test]
    fn undecodable_image() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.png");
        std::fs::write(&path, b"not an image").unwrap();
        assert!(matches!(load_image(&path), Err(Error::Decode { .. })));
    }
}
