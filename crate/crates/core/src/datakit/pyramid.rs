use super::Plane;
use crate::error::{Error, Result};

/// Block-mean downsample by integer factors.
pub fn area_downsample(map: &Plane, height: usize, width: usize) -> Result<Plane> {
    let (h, w) = map.size();
    if height == 0 || width == 0 || height > h || width > w {
        return Err(Error::invalid(format!("cannot downsample {h}x{w} to {height}x{width}")));
    }
    if h % height != 0 || w % width != 0 {
        return Err(Error::invalid(format!("{height}x{width} does not evenly divide {h}x{w}")));
    }
    let (fy, fx) = (h / height, w / width);
    if (fy, fx) == (1, 1) {
        return Ok(map.clone());
    }
    let area = (fy * fx) as f64;
    Ok(Plane::from_fn(height, width, |y, x| {
        let mut acc = 0.0;
        for yy in y * fy..(y + 1) * fy {
            for xx in x * fx..(x + 1) * fx {
                acc += map.get(yy, xx);
            }
        }
        acc / area
    }))
}

/// Binary masks at each requested resolution: block mean, then `>= 0.5`.
pub fn gt_pyramid(gt: &Plane, resolutions: &[(usize, usize)]) -> Result<Vec<Plane>> {
    resolutions.iter().map(|&(h, w)| Ok(area_downsample(gt, h, w)?.map(|v| if v >= 0.5 { 1.0 } else { 0.0 }))).collect()
}

/// Real-valued targets (e.g. depth contours) at each resolution.
pub fn mean_pyramid(map: &Plane, resolutions: &[(usize, usize)]) -> Result<Vec<Plane>> {
    resolutions.iter().map(|&(h, w)| area_downsample(map, h, w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_stays_all_ones() {
        let gt = Plane::filled(8, 8, 1.0);
        for level in gt_pyramid(&gt, &[(8, 8), (4, 4), (2, 2), (1, 1)]).unwrap() {
            assert!(level.data().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn quadrant_maps_to_single_pixel() {
        let gt = Plane::from_fn(4, 4, |y, x| if y < 2 && x >= 2 { 1.0 } else { 0.0 });
        let level = &gt_pyramid(&gt, &[(2, 2)]).unwrap()[0];
        assert_eq!(level.data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn checkerboard_tie_goes_to_foreground() {
        let gt = Plane::from_fn(4, 4, |y, x| ((y + x) % 2) as f64);
        let level = &gt_pyramid(&gt, &[(2, 2)]).unwrap()[0];
        assert_eq!(level.data(), &[1.0; 4]);
    }

    #[test]
    fn larger_target_is_an_error() {
        assert!(gt_pyramid(&Plane::zeros(4, 4), &[(8, 8)]).is_err());
        assert!(gt_pyramid(&Plane::zeros(6, 6), &[(4, 4)]).is_err());
    }
}
