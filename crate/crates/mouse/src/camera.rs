//! Pinhole camera looking straight down at the floor plane z = 0.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Camera height above the floor (mm).
pub const CAMERA_HEIGHT: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels.
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    /// Height of the optical centre above the floor (mm).
    pub elevation: f64,
}

impl Camera {
    /// 64x64 desk-scale camera; about 218 mm of floor across the image.
    pub fn desk() -> Self {
        Camera::new(64, 64, 170.0)
    }

    /// 160x120 full-scale camera with the same vertical field of view.
    pub fn full() -> Self {
        Camera::new(160, 120, 318.75)
    }

    pub fn new(width: usize, height: usize, focal: f64) -> Self {
        Camera {
            width,
            height,
            focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            elevation: CAMERA_HEIGHT,
        }
    }

    pub fn origin(&self) -> Point3<f64> {
        Point3::new(0.0, 0.0, self.elevation)
    }

    /// Depth recorded where nothing but the floor is seen.
    pub fn floor_depth(&self) -> f64 {
        self.elevation
    }

    /// Ray direction through the centre of pixel `(u, v)` (column, row).
    /// The z component is -1, so the ray parameter equals depth. Image rows
    /// grow toward -y.
    pub fn ray(&self, u: usize, v: usize) -> Vector3<f64> {
        Vector3::new(
            (u as f64 + 0.5 - self.cx) / self.focal,
            -(v as f64 + 0.5 - self.cy) / self.focal,
            -1.0,
        )
    }

    /// 3D point seen at pixel `(u, v)` with depth `d`.
    pub fn backproject(&self, u: usize, v: usize, d: f64) -> Point3<f64> {
        self.origin() + self.ray(u, v) * d
    }

    /// Continuous image coordinates `(u, v)` and depth of a world point.
    /// Pixel `(i, j)` covers `[i, i + 1) x [j, j + 1)`.
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let d = self.elevation - p.z;
        (self.cx + self.focal * p.x / d, self.cy - self.focal * p.y / d, d)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }
}
