use alloc::vec::Vec;

use crate::graph::Network;
use crate::params::ParamVector;
use crate::validate::CmoAnnotation;

/// A network together with its parameters and, for networks assembled from
/// conditional mixing operators, the CMO annotations the validator needs.
#[derive(Clone, Debug)]
pub struct Model {
    pub network: Network,
    pub params: ParamVector,
    pub cmos: Vec<CmoAnnotation>,
}

impl Model {
    pub fn new(network: Network, params: ParamVector) -> Self {
        Model {
            network,
            params,
            cmos: Vec::new(),
        }
    }

    pub fn with_cmos(mut self, cmos: Vec<CmoAnnotation>) -> Self {
        self.cmos = cmos;
        self
    }
}
