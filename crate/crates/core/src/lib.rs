//! Task-oriented grasping: reason about which object part serves an
//! instruction, ground that part in an RGB-D observation, and pick a
//! parallel-jaw grasp on it.

pub mod geometry;
pub mod gripper;
pub mod grounding;
pub mod pipeline;
pub mod reasoning;
pub mod scene;
pub mod selection;
pub mod synthesis;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/reasoning.md")]
    mod reasoning {}
    #[doc = include_str!("../../../book/src/grounding.md")]
    mod grounding {}
    #[doc = include_str!("../../../book/src/grasps.md")]
    mod grasps {}
    #[doc = include_str!("../../../book/src/runs.md")]
    mod runs {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
