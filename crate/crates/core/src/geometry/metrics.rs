use super::grid::ScalarGrid;
use super::image::Image;
use super::kdtree::KdTree;
use crate::error::{Error, Result};

fn check_sets<const D: usize>(a: &[[f64; D]], b: &[[f64; D]]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("chamfer distance needs two non-empty point sets"));
    }
    Ok(())
}

fn mean_nearest<const D: usize>(from: &[[f64; D]], to: &KdTree<D>) -> f64 {
    from.iter().map(|p| to.nearest_distance(p)).sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance with Euclidean (not squared) nearest-neighbour
/// distances, each direction averaged over its own point count.
pub fn chamfer<const D: usize>(a: &[[f64; D]], b: &[[f64; D]]) -> Result<f64> {
    check_sets(a, b)?;
    let ta = KdTree::build(a);
    let tb = KdTree::build(b);
    Ok(mean_nearest(a, &tb) + mean_nearest(b, &ta))
}

/// O(N_a·N_b) reference for [`chamfer`].
pub fn chamfer_bruteforce<const D: usize>(a: &[[f64; D]], b: &[[f64; D]]) -> Result<f64> {
    check_sets(a, b)?;
    let one_way = |from: &[[f64; D]], to: &[[f64; D]]| {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum::<f64>()
            / from.len() as f64
    };
    Ok(one_way(a, b) + one_way(b, a))
}

/// Mean absolute difference over all lattice points.
pub fn mae(a: &ScalarGrid, b: &ScalarGrid) -> Result<f64> {
    if a.res != b.res || a.bounds != b.bounds {
        return Err(Error::invalid("grids differ in resolution or bounds"));
    }
    let n = a.values.len() as f64;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

/// Peak signal-to-noise ratio in dB for unit-range images. Identical images
/// give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) {
        return Err(Error::invalid("images differ in size or channel count"));
    }
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}
