use std::sync::Arc;

use rand::Rng;

use super::oracle::{ground_in, receptacles_in};
use super::*;
use crate::world::catalog;

/// Wraps a classifier reactor and corrupts its answer with probability `eps`.
pub struct NoisyReactor {
    name: String,
    inner: Arc<dyn Reactor>,
    eps: f64,
}

impl NoisyReactor {
    pub fn new(name: &str, inner: Arc<dyn Reactor>, eps: f64) -> NoisyReactor {
        NoisyReactor { name: name.to_string(), inner, eps }
    }
}

impl Reactor for NoisyReactor {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let clean = self.inner.answer(ep, args)?;
        if self.eps <= 0.0 || ep.rng().gen::<f64>() >= self.eps {
            return Ok(clean);
        }
        Ok(match (self.name.as_str(), clean) {
            (CHECK_OBJ_ATTR, v) => {
                let (openable, open) = attr_flags(&v).unwrap_or((false, false));
                // an agent-opened receptacle is remembered, not re-perceived
                let id = obj_arg(CHECK_OBJ_ATTR, args, 0)?.and_then(|o| ep.resolve(o));
                if id.as_deref().and_then(|id| opened_by_agent(ep, id)).is_some() {
                    v
                } else if openable {
                    attr_record(true, !open)
                } else {
                    attr_record(true, false)
                }
            }
            (CHECK_OBJ_RECEP_REL, Value::Enum(e)) => rel_value(e != OBJ_IN_RECEP),
            (FIND_OBJ_RECEP | FIND_RECEP, v) => {
                let current = v.as_obj().map(|o| o.class.clone());
                let mut others: Vec<String> = catalog::receptacle_names()
                    .filter(|c| Some(*c) != current.as_deref() && ep.scene.instances_of(c).next().is_some())
                    .map(str::to_string)
                    .collect();
                others.sort();
                if others.is_empty() {
                    v
                } else {
                    let k = ep.rng().gen_range(0..others.len());
                    Value::obj(&others[k])
                }
            }
            (_, v) => v,
        })
    }

    fn describe(&self) -> String {
        format!("noisy(eps={}, {})", self.eps, self.inner.describe())
    }
}

/// Detector-backed reactors that read the episode's noisy perception channel.
pub struct NoisyDetector {
    name: &'static str,
}

impl NoisyDetector {
    pub fn detect_recep() -> NoisyDetector {
        NoisyDetector { name: DETECT_RECEP }
    }

    pub fn mask_generator() -> NoisyDetector {
        NoisyDetector { name: MASK_GENERATOR }
    }
}

impl Reactor for NoisyDetector {
    fn answer(&self, ep: &mut Episode, args: &[Value]) -> Result<Value, ReactorError> {
        let obs = ep.perceive();
        match self.name {
            DETECT_RECEP => Ok(receptacles_in(&obs)),
            _ => {
                let Some(obj) = obj_arg(MASK_GENERATOR, args, 0)? else { return Ok(Value::None) };
                Ok(ground_in(ep, &obs, obj))
            }
        }
    }

    fn describe(&self) -> String {
        format!("noisy-detector({})", self.name)
    }
}
