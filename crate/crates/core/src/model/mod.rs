//! Item response model: link functions, data containers and the joint
//! likelihood with its row-wise gradients.

mod data;
mod likelihood;
mod link;

pub use data::{person_radius, ParameterSet, ResponseData};
pub use likelihood::{grad_item, grad_person, item_nll, joint_nll, person_nll};
pub use link::{LinkFunction, RegularityCheck, PROB_FLOOR};

pub(crate) use likelihood::{total_nll, CompensatedSum};
