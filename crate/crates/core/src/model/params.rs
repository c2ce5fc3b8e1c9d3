use super::{ElementRef, EmbeddingModel, TargetRef};
use crate::error::{Error, Result};

/// Read access to embedding parameters, widened to `f64`.
///
/// Implemented by [`EmbeddingModel`] and by the lock-free view that
/// multi-worker training shares between threads.
pub trait Parameters {
    fn dim(&self) -> usize;
    fn text_category(&self) -> usize;
    fn is_textual(&self, category: usize) -> bool;
    fn read_target(&self, e: ElementRef, out: &mut [f64]);
    /// Only valid for non-textual elements.
    fn read_context(&self, e: ElementRef, out: &mut [f64]);
    fn read_bias(&self, e: ElementRef) -> f64;
    fn noise_prob(&self, e: ElementRef) -> f64;
}

pub trait ParametersMut: Parameters {
    /// `υ_e += scale · delta`
    fn add_target(&mut self, e: ElementRef, delta: &[f64], scale: f64);
    /// `ω_e += scale · delta`
    fn add_context(&mut self, e: ElementRef, delta: &[f64], scale: f64);
    fn add_bias(&mut self, e: ElementRef, delta: f64);
}

/// Writes the target vector of `target` into `out`.
pub(crate) fn read_target_ref<P: Parameters + ?Sized>(
    params: &P,
    target: &TargetRef<'_>,
    out: &mut [f64],
) -> Result<()> {
    match *target {
        TargetRef::Element(e) => params.read_target(e, out),
        TargetRef::TextAverage(text) => {
            if text.is_empty() {
                return Err(Error::EmptyText);
            }
            let cat = params.text_category();
            let mut row = vec![0.0; out.len()];
            out.fill(0.0);
            for &tok in text {
                params.read_target(ElementRef::new(cat, tok as usize), &mut row);
                out.iter_mut().zip(&row).for_each(|(o, r)| *o += r);
            }
            let n = text.len() as f64;
            out.iter_mut().for_each(|o| *o /= n);
        }
    }
    Ok(())
}

fn widen(src: &[f32], out: &mut [f64]) {
    out.iter_mut().zip(src).for_each(|(o, &s)| *o = s as f64);
}

fn add_scaled(dst: &mut [f32], delta: &[f64], scale: f64) {
    dst.iter_mut()
        .zip(delta)
        .for_each(|(d, &g)| *d = (*d as f64 + scale * g) as f32);
}

impl Parameters for EmbeddingModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn text_category(&self) -> usize {
        self.text_category
    }

    fn is_textual(&self, category: usize) -> bool {
        EmbeddingModel::is_textual(self, category)
    }

    fn read_target(&self, e: ElementRef, out: &mut [f64]) {
        widen(self.target(e), out);
    }

    fn read_context(&self, e: ElementRef, out: &mut [f64]) {
        widen(self.context(e).expect("context of a textual element"), out);
    }

    fn read_bias(&self, e: ElementRef) -> f64 {
        self.bias(e).expect("bias of a textual element") as f64
    }

    fn noise_prob(&self, e: ElementRef) -> f64 {
        self.categories[e.category].noise[e.index]
    }
}

impl ParametersMut for EmbeddingModel {
    fn add_target(&mut self, e: ElementRef, delta: &[f64], scale: f64) {
        add_scaled(self.target_mut(e), delta, scale);
    }

    fn add_context(&mut self, e: ElementRef, delta: &[f64], scale: f64) {
        add_scaled(
            self.context_mut(e).expect("context of a textual element"),
            delta,
            scale,
        );
    }

    fn add_bias(&mut self, e: ElementRef, delta: f64) {
        let b = self.bias_mut(e).expect("bias of a textual element");
        *b = (*b as f64 + delta) as f32;
    }
}
