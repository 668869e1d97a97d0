//! Object classes built from primitives. Object frames have z up with the
//! table at z = 0.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::shapes::{PlacedPrimitive, Primitive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Mug,
    Spoon,
    Hammer,
    Screwdriver,
    Bowl,
    Bottle,
    Pan,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 7] = [
        ObjectClass::Mug,
        ObjectClass::Spoon,
        ObjectClass::Hammer,
        ObjectClass::Screwdriver,
        ObjectClass::Bowl,
        ObjectClass::Bottle,
        ObjectClass::Pan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Mug => "mug",
            ObjectClass::Spoon => "spoon",
            ObjectClass::Hammer => "hammer",
            ObjectClass::Screwdriver => "screwdriver",
            ObjectClass::Bowl => "bowl",
            ObjectClass::Bottle => "bottle",
            ObjectClass::Pan => "pan",
        }
    }

    /// Functional parts in part-index order.
    pub fn parts(self) -> Vec<PartSpec> {
        use AffordanceTag::*;
        let p = |name: &str, tags: &[AffordanceTag]| PartSpec { name: name.to_string(), tags: tags.to_vec() };
        match self {
            ObjectClass::Mug => vec![p("body", &[Contain, Pour]), p("handle", &[Grasp])],
            ObjectClass::Spoon => vec![p("bowl", &[Scoop, Contain]), p("handle", &[Grasp])],
            ObjectClass::Hammer => vec![p("head", &[Pound]), p("handle", &[Grasp])],
            ObjectClass::Screwdriver => vec![p("shaft", &[Screw]), p("handle", &[Grasp])],
            ObjectClass::Bowl => vec![p("body", &[Contain]), p("rim", &[Grasp])],
            ObjectClass::Bottle => vec![p("body", &[Contain]), p("neck", &[Grasp, Pour]), p("cap", &[Screw])],
            ObjectClass::Pan => vec![p("body", &[Contain]), p("handle", &[Grasp])],
        }
    }

    /// Primitives at unit scale.
    pub fn primitives(self) -> Vec<PlacedPrimitive> {
        use Primitive::*;
        let at = |x: f64, y: f64, z: f64| Isometry3::translation(x, y, z);
        // cylinder axis along object x
        let along_x = |x: f64, z: f64| {
            Isometry3::from_parts(
                Translation3::new(x, 0.0, z),
                UnitQuaternion::from_axis_angle(&Vector3::y_axis(), FRAC_PI_2),
            )
        };
        let cyl = |radius: f64, length: f64| Cylinder { radius, length, caps: true };
        match self {
            ObjectClass::Mug => vec![
                PlacedPrimitive::new(cyl(0.04, 0.10), at(0.0, 0.0, 0.05), 0),
                PlacedPrimitive::new(
                    Torus { major: 0.03, minor: 0.006, start: -FRAC_PI_2, sweep: PI },
                    Isometry3::from_parts(
                        Translation3::new(0.04, 0.0, 0.05),
                        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), FRAC_PI_2),
                    ),
                    1,
                ),
            ],
            ObjectClass::Spoon => {
                let hemisphere = |radius: f64| Sphere { radius, polar_min: FRAC_PI_2, polar_max: PI };
                vec![
                    PlacedPrimitive::new(hemisphere(0.022), at(-0.065, 0.0, 0.022), 0).shell(),
                    PlacedPrimitive::new(hemisphere(0.019), at(-0.065, 0.0, 0.022), 0).inner_wall(),
                    PlacedPrimitive::new(cyl(0.006, 0.13), along_x(0.022, 0.018), 1),
                ]
            }
            ObjectClass::Hammer => vec![
                PlacedPrimitive::new(Cuboid { half_extents: Vector3::new(0.015, 0.05, 0.015) }, at(0.11, 0.0, 0.015), 0),
                PlacedPrimitive::new(cyl(0.0075, 0.22), along_x(0.0, 0.015), 1),
            ],
            ObjectClass::Screwdriver => vec![
                PlacedPrimitive::new(Cylinder { radius: 0.003, length: 0.10, caps: true }, along_x(0.04, 0.0075), 0),
                PlacedPrimitive::new(cyl(0.0075, 0.09), along_x(-0.05, 0.0075), 1),
            ],
            ObjectClass::Bowl => {
                let hemisphere = |radius: f64| Sphere { radius, polar_min: FRAC_PI_2, polar_max: PI };
                vec![
                    PlacedPrimitive::new(hemisphere(0.06), at(0.0, 0.0, 0.06), 0).shell(),
                    PlacedPrimitive::new(hemisphere(0.054), at(0.0, 0.0, 0.06), 0).inner_wall(),
                    PlacedPrimitive::new(
                        Torus { major: 0.057, minor: 0.006, start: 0.0, sweep: TAU },
                        at(0.0, 0.0, 0.06),
                        1,
                    ),
                ]
            }
            ObjectClass::Bottle => vec![
                PlacedPrimitive::new(cyl(0.03, 0.14), along_x(-0.04, 0.03), 0),
                PlacedPrimitive::new(cyl(0.0075, 0.053), along_x(0.0515, 0.03), 1),
                PlacedPrimitive::new(cyl(0.009, 0.015), along_x(0.0825, 0.03), 2),
            ],
            ObjectClass::Pan => vec![
                PlacedPrimitive::new(cyl(0.09, 0.03), at(-0.06, 0.0, 0.015), 0),
                PlacedPrimitive::new(cyl(0.007, 0.13), along_x(0.09, 0.022), 1),
            ],
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        ObjectClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown object class '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffordanceTag {
    Grasp,
    Contain,
    Pour,
    Scoop,
    Pound,
    Screw,
    Cut,
}

impl AffordanceTag {
    pub fn name(self) -> &'static str {
        match self {
            AffordanceTag::Grasp => "grasp",
            AffordanceTag::Contain => "contain",
            AffordanceTag::Pour => "pour",
            AffordanceTag::Scoop => "scoop",
            AffordanceTag::Pound => "pound",
            AffordanceTag::Screw => "screw",
            AffordanceTag::Cut => "cut",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartSpec {
    pub name: String,
    pub tags: Vec<AffordanceTag>,
}

impl PartSpec {
    pub fn graspable(&self) -> bool {
        self.tags.contains(&AffordanceTag::Grasp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::shapes::sample_primitives;

    #[test]
    fn every_class_has_a_grasp_part() {
        for class in ObjectClass::ALL {
            let parts = class.parts();
            assert!(parts.iter().any(PartSpec::graspable), "{class}");
            for prim in class.primitives() {
                assert!((prim.part as usize) < parts.len());
            }
        }
    }

    #[test]
    fn every_part_is_sampled() {
        for class in ObjectClass::ALL {
            let samples = sample_primitives(&class.primitives(), 0.002);
            for (idx, part) in class.parts().iter().enumerate() {
                assert!(samples.iter().any(|s| s.2 as usize == idx), "{class}/{}", part.name);
            }
            assert!(samples.iter().all(|s| s.0.z >= -1e-9), "{class} dips below the table");
        }
    }

    #[test]
    fn names_parse_back() {
        for class in ObjectClass::ALL {
            assert_eq!(class.name().parse::<ObjectClass>().unwrap(), class);
        }
        assert!("unicorn".parse::<ObjectClass>().is_err());
    }
}
