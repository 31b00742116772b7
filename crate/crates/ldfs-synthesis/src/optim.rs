//! Adaptive-moment optimizer with decoupled weight decay.

use ndarray::{Array1, Array2};

use crate::loss::MapperGrads;
use crate::mapper::MapperParams;

pub struct AdamW {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Option<MapperGrads>,
    v: Option<MapperGrads>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: None,
            v: None,
        }
    }

    pub fn step(&mut self, params: &mut MapperParams, grads: &MapperGrads) {
        if self.m.is_none() {
            self.m = Some(zeros_like(grads));
            self.v = Some(zeros_like(grads));
        }
        self.t += 1;
        let hp = HyperParams {
            lr: self.lr,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            bc1: 1.0 - self.beta1.powi(self.t as i32),
            bc2: 1.0 - self.beta2.powi(self.t as i32),
        };
        let m = self.m.as_mut().expect("initialized above");
        let v = self.v.as_mut().expect("initialized above");

        update2(&mut params.w1, &grads.w1, &mut m.w1, &mut v.w1, hp);
        update1(&mut params.b1, &grads.b1, &mut m.b1, &mut v.b1, hp);
        update2(&mut params.w2, &grads.w2, &mut m.w2, &mut v.w2, hp);
        update1(&mut params.b2, &grads.b2, &mut m.b2, &mut v.b2, hp);
    }
}

#[derive(Clone, Copy)]
struct HyperParams {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
}

fn zeros_like(g: &MapperGrads) -> MapperGrads {
    MapperGrads {
        w1: Array2::zeros(g.w1.raw_dim()),
        b1: Array1::zeros(g.b1.raw_dim()),
        w2: Array2::zeros(g.w2.raw_dim()),
        b2: Array1::zeros(g.b2.raw_dim()),
    }
}

macro_rules! adamw_update {
    ($name:ident, $arr:ty) => {
        fn $name(p: &mut $arr, g: &$arr, m: &mut $arr, v: &mut $arr, hp: HyperParams) {
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
                    *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
                    let m_hat = *m / hp.bc1;
                    let v_hat = *v / hp.bc2;
                    // decoupled decay: shrink the parameter directly
                    *p -= hp.lr * (m_hat / (v_hat.sqrt() + hp.eps) + hp.weight_decay * *p);
                });
        }
    };
}

adamw_update!(update2, Array2<f64>);
adamw_update!(update1, Array1<f64>);
