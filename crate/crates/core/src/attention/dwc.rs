use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::nystrom::PoolGeometry;
use crate::scalar::Scalar;

pub const DEFAULT_DWC_WIDTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DwcLayout {
    /// `width` taps along the token sequence.
    Line,
    /// `width × width` taps on the token grid, row-major.
    Grid,
}

/// Per-channel depthwise convolution taps, one row per value channel.
#[derive(Clone, Debug, PartialEq)]
pub struct DwcWeights<T = f64> {
    taps: DenseMatrix<T>,
    width: usize,
    layout: DwcLayout,
}

impl<T: Scalar> DwcWeights<T> {
    /// `taps` is `d_v × width`; `width` must be odd.
    pub fn line(taps: DenseMatrix<T>) -> Result<Self> {
        let width = taps.cols();
        check_width(width)?;
        Ok(Self {
            taps,
            width,
            layout: DwcLayout::Line,
        })
    }

    /// `taps` is `d_v × width²` with `width` odd.
    pub fn grid(taps: DenseMatrix<T>, width: usize) -> Result<Self> {
        check_width(width)?;
        if taps.cols() != width * width {
            return Err(Error::contract(format!(
                "{width}x{width} depthwise kernel needs {} taps per channel, got {}",
                width * width,
                taps.cols()
            )));
        }
        Ok(Self {
            taps,
            width,
            layout: DwcLayout::Grid,
        })
    }

    /// All-zero taps.
    pub fn zeros(channels: usize, width: usize, layout: DwcLayout) -> Result<Self> {
        match layout {
            DwcLayout::Line => Self::line(DenseMatrix::zeros(channels, width)),
            DwcLayout::Grid => Self::grid(DenseMatrix::zeros(channels, width * width), width),
        }
    }

    /// Centre tap 1, everything else 0.
    pub fn delta(channels: usize, width: usize, layout: DwcLayout) -> Result<Self> {
        let mut w = Self::zeros(channels, width, layout)?;
        let centre = w.taps.cols() / 2;
        for c in 0..channels {
            w.taps[(c, centre)] = T::one();
        }
        Ok(w)
    }

    /// Every tap `1 / (number of taps)`.
    pub fn mean_box(channels: usize, width: usize, layout: DwcLayout) -> Result<Self> {
        let mut w = Self::zeros(channels, width, layout)?;
        let v = T::one() / T::of_usize(w.taps.cols());
        w.taps.as_mut_slice().iter_mut().for_each(|t| *t = v);
        Ok(w)
    }

    pub fn taps(&self) -> &DenseMatrix<T> {
        &self.taps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layout(&self) -> DwcLayout {
        self.layout
    }

    pub fn channels(&self) -> usize {
        self.taps.rows()
    }
}

fn check_width(width: usize) -> Result<()> {
    if width % 2 == 0 {
        return Err(Error::contract(format!("depthwise kernel width must be odd, got {width}")));
    }
    Ok(())
}

/// Depthwise convolution of `v` with zero padding. Line weights convolve
/// along the token index; grid weights need `geometry` and convolve over the
/// `height × width` token grid. Taps are applied in correlation order, so
/// tap `s` of a line kernel multiplies token `t + s − ⌊w/2⌋`.
pub fn dwc<T: Scalar>(v: &DenseMatrix<T>, weights: &DwcWeights<T>, geometry: Option<&PoolGeometry>) -> Result<DenseMatrix<T>> {
    let mut out = DenseMatrix::zeros(v.rows(), v.cols());
    dwc_accumulate(v, weights, geometry, &mut out)?;
    Ok(out)
}

/// Adds `dwc(v)` into `out` without allocating.
pub fn dwc_accumulate<T: Scalar>(
    v: &DenseMatrix<T>,
    weights: &DwcWeights<T>,
    geometry: Option<&PoolGeometry>,
    out: &mut DenseMatrix<T>,
) -> Result<()> {
    if weights.channels() != v.cols() {
        return Err(Error::shape("dwc", v.shape(), weights.taps.shape()));
    }
    if out.shape() != v.shape() {
        return Err(Error::shape("dwc", v.shape(), out.shape()));
    }
    let n = v.rows() as isize;
    let half = (weights.width / 2) as isize;
    match (weights.layout, geometry) {
        (DwcLayout::Line, None) => {
            for t in 0..n {
                for s in 0..weights.width as isize {
                    let src = t + s - half;
                    if src < 0 || src >= n {
                        continue;
                    }
                    let vs = v.row(src as usize);
                    let o = out.row_mut(t as usize);
                    for (c, (oc, &x)) in o.iter_mut().zip(vs).enumerate() {
                        *oc += weights.taps[(c, s as usize)] * x;
                    }
                }
            }
        }
        (DwcLayout::Grid, Some(geom)) => {
            geom.check_tokens(v.rows())?;
            let (h, w) = (geom.height() as isize, geom.width() as isize);
            let kw = weights.width as isize;
            for y in 0..h {
                for x in 0..w {
                    let t = (y * w + x) as usize;
                    for a in 0..kw {
                        let sy = y + a - half;
                        if sy < 0 || sy >= h {
                            continue;
                        }
                        for b in 0..kw {
                            let sx = x + b - half;
                            if sx < 0 || sx >= w {
                                continue;
                            }
                            let tap = (a * kw + b) as usize;
                            let vs = v.row((sy * w + sx) as usize);
                            let o = out.row_mut(t);
                            for (c, (oc, &val)) in o.iter_mut().zip(vs).enumerate() {
                                *oc += weights.taps[(c, tap)] * val;
                            }
                        }
                    }
                }
            }
        }
        (DwcLayout::Grid, None) => {
            return Err(Error::contract("grid depthwise kernel needs a token geometry"));
        }
        (DwcLayout::Line, Some(_)) => {
            return Err(Error::contract("line depthwise kernel given a token grid; use grid taps"));
        }
    }
    Ok(())
}
