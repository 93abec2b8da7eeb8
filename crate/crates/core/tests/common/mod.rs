#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Zipf};
use sptucker::tensor::{Element, SparseTensor};

/// `nnz` distinct random cells with values in [-1, 1).
pub fn random_tensor<R: Rng>(rng: &mut R, dims: &[usize], nnz: usize) -> SparseTensor {
    let cells: usize = dims.iter().product();
    let mut ids: Vec<usize> = (0..cells).collect();
    ids.shuffle(rng);
    let elements = ids[..nnz.min(cells)].iter().map(|&pos| {
        let mut rest = pos;
        let coords = dims
            .iter()
            .map(|&d| {
                let c = rest % d;
                rest /= d;
                c
            })
            .collect();
        Element::new(coords, rng.gen_range(-1.0..1.0))
    });
    SparseTensor::new(dims.to_vec(), elements).unwrap()
}

/// Random tensor whose mode-1 coordinates follow a Zipf law, so a few
/// slices hold most elements. Duplicate draws merge.
pub fn zipf_tensor<R: Rng>(rng: &mut R, dims: &[usize], draws: usize, exponent: f64) -> SparseTensor {
    let zipf = Zipf::new(dims[0] as u64, exponent).unwrap();
    let elements: Vec<Element> = (0..draws)
        .map(|_| {
            let mut coords = vec![zipf.sample(rng) as usize - 1];
            coords.extend(dims[1..].iter().map(|&d| rng.gen_range(0..d)));
            Element::new(coords, rng.gen_range(0.5..1.5))
        })
        .collect();
    SparseTensor::new(dims.to_vec(), elements).unwrap()
}

/// Tensor of dims (len, max, 1) where slice `l` of mode 1 holds `sizes[l]` elements.
pub fn sliced_tensor(sizes: &[usize]) -> SparseTensor {
    let max = sizes.iter().copied().max().unwrap_or(1).max(1);
    let elements = sizes
        .iter()
        .enumerate()
        .flat_map(|(l, &s)| (0..s).map(move |k| Element::new(vec![l, k, 0], 1.0 + (l * 7 + k) as f64 * 0.01)));
    SparseTensor::new(vec![sizes.len(), max, 1], elements).unwrap()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}
