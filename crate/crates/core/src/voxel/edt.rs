/// Exact squared Euclidean distance transform on a dense x-fastest grid, in
/// voxel units. Each voxel gets the squared distance to the nearest voxel
/// flagged in `features`, or `+inf` when no voxel is flagged.
pub fn squared_distance_transform(features: &[bool], dims: [usize; 3]) -> Vec<f64> {
    let n = dims[0] * dims[1] * dims[2];
    assert_eq!(features.len(), n, "feature mask does not match dims");
    let mut f: Vec<f64> = features.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    if n == 0 {
        return f;
    }
    let strides = [1, dims[0], dims[0] * dims[1]];
    let longest = dims.iter().copied().max().unwrap_or(0);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut hull = Hull::with_capacity(longest);
    for axis in 0..3 {
        let len = dims[axis];
        let stride = strides[axis];
        let (o1, o2) = ((axis + 1) % 3, (axis + 2) % 3);
        for j in 0..dims[o2] {
            for i in 0..dims[o1] {
                let start = i * strides[o1] + j * strides[o2];
                for k in 0..len {
                    line[k] = f[start + k * stride];
                }
                hull.transform(&line[..len], &mut out[..len]);
                for k in 0..len {
                    f[start + k * stride] = out[k];
                }
            }
        }
    }
    f
}

/// Lower envelope of parabolas for the 1D pass.
struct Hull {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Hull {
    fn with_capacity(n: usize) -> Self {
        Hull {
            v: Vec::with_capacity(n),
            z: Vec::with_capacity(n + 1),
        }
    }

    fn transform(&mut self, f: &[f64], d: &mut [f64]) {
        self.v.clear();
        self.z.clear();
        for q in 0..f.len() {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + (q * q) as f64;
            loop {
                match self.v.last() {
                    None => {
                        self.v.push(q);
                        self.z.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&p) => {
                        let fp = f[p] + (p * p) as f64;
                        let s = (fq - fp) / (2.0 * (q - p) as f64);
                        if s <= *self.z.last().unwrap() {
                            self.v.pop();
                            self.z.pop();
                        } else {
                            self.v.push(q);
                            self.z.push(s);
                            break;
                        }
                    }
                }
            }
        }
        if self.v.is_empty() {
            d.iter_mut().for_each(|x| *x = f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, dq) in d.iter_mut().enumerate() {
            while k + 1 < self.v.len() && self.z[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.v[k];
            let dx = q as f64 - p as f64;
            *dq = dx * dx + f[p];
        }
    }
}
