use super::Tensor;
use crate::error::{Error, Result};
use crate::graph::record::fmt_real;
use rand::Rng;
use serde::Deserialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// Named trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// All parameters of one model, addressed by id or by unique name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidParameter(format!(
                "duplicate parameter `{name}`"
            )));
        }
        let (r, c) = value.shape();
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            value,
            grad: Tensor::zeros(r, c),
        });
        Ok(ParamId(id))
    }

    /// Weight matrix `fan_in x fan_out` drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        self.add(name, Tensor::from_vec(rows, cols, data)?)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(|p| p.grad.fill(0.0));
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Order-sensitive digest of all values, used to detect mutation.
    pub fn checksum(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for p in &self.params {
            for x in p.value.data() {
                h = (h ^ x.to_bits()).wrapping_mul(0x0000_0100_0000_01B3);
            }
        }
        h
    }

    /// One line per parameter, sorted by name:
    /// `{"name":..,"shape":[r,c],"values":[..]}` with 17 significant digits.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        for (name, &i) in &self.by_name {
            let p = &self.params[i];
            let (r, c) = p.value.shape();
            let values: Vec<String> = p.value.data().iter().map(|&x| fmt_real(x)).collect();
            out.push_str(&format!(
                "{{\"name\":{},\"shape\":[{r},{c}],\"values\":[{}]}}\n",
                serde_json::to_string(name).expect("string serializes"),
                values.join(",")
            ));
        }
        out
    }

    /// Overwrites values from a checkpoint. Names and shapes must match this
    /// store exactly.
    pub fn load_checkpoint(&mut self, text: &str) -> Result<()> {
        #[derive(Deserialize)]
        struct Entry {
            name: String,
            shape: [usize; 2],
            values: Vec<f64>,
        }
        let mut seen = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Entry = serde_json::from_str(line).map_err(|err| Error::Parse {
                line: i + 1,
                msg: err.to_string(),
            })?;
            let id = self.id(&e.name).ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("unknown parameter `{}`", e.name),
            })?;
            let p = &mut self.params[id.0];
            if p.value.shape() != (e.shape[0], e.shape[1]) {
                return Err(Error::ShapeMismatch {
                    op: "load_checkpoint",
                    lhs: p.value.shape(),
                    rhs: (e.shape[0], e.shape[1]),
                });
            }
            p.value =
                Tensor::from_vec(e.shape[0], e.shape[1], e.values).map_err(|err| Error::Parse {
                    line: i + 1,
                    msg: err.to_string(),
                })?;
            seen += 1;
        }
        if seen != self.params.len() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("checkpoint has {seen} of {} parameters", self.params.len()),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("a", Tensor::zeros(1, 1)).unwrap();
        assert!(s.add("a", Tensor::zeros(1, 1)).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = crate::seed::rng(3);
        let mut s = ParamStore::new();
        s.add_uniform("z.w", 3, 4, 3, &mut rng).unwrap();
        s.add_uniform("a.b", 1, 4, 3, &mut rng).unwrap();
        let text = s.to_checkpoint();
        assert!(text.lines().next().unwrap().contains("\"a.b\""));
        let mut t = s.clone();
        t.iter_mut().for_each(|p| p.value.fill(0.0));
        t.load_checkpoint(&text).unwrap();
        assert_eq!(s, t);
        assert_eq!(s.checksum(), t.checksum());
    }

    #[test]
    fn checkpoint_shape_mismatch() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::zeros(2, 2)).unwrap();
        let bad = "{\"name\":\"w\",\"shape\":[1,2],\"values\":[0,0]}\n";
        assert!(s.load_checkpoint(bad).is_err());
    }
}
