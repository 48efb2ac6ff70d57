//! Static object vocabulary: per-class affordances, default height band and
//! apparent size.

use super::geom::HeightBand;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    /// Furniture or appliance that holds other objects.
    Receptacle,
    /// Immovable, non-holding object (lamp, faucet).
    Fixture,
    /// Movable object.
    Item,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassSpec {
    pub name: &'static str,
    pub kind: ClassKind,
    pub openable: bool,
    pub toggleable: bool,
    pub sliceable: bool,
    /// Band for furniture; ignored for items (they inherit their container's).
    pub band: HeightBand,
    /// Apparent width/height at one cell distance.
    pub size: (f64, f64),
}

const fn recep(name: &'static str, openable: bool, band: HeightBand, size: (f64, f64)) -> ClassSpec {
    ClassSpec { name, kind: ClassKind::Receptacle, openable, toggleable: false, sliceable: false, band, size }
}

const fn appliance(name: &'static str, openable: bool, band: HeightBand, size: (f64, f64)) -> ClassSpec {
    ClassSpec { toggleable: true, ..recep(name, openable, band, size) }
}

const fn fixture(name: &'static str, band: HeightBand, size: (f64, f64)) -> ClassSpec {
    ClassSpec { name, kind: ClassKind::Fixture, openable: false, toggleable: true, sliceable: false, band, size }
}

const fn item(name: &'static str, sliceable: bool, size: (f64, f64)) -> ClassSpec {
    ClassSpec {
        name,
        kind: ClassKind::Item,
        openable: false,
        toggleable: false,
        sliceable,
        band: HeightBand::Mid,
        size,
    }
}

pub static CLASSES: &[ClassSpec] = &[
    recep("fridge", true, HeightBand::Mid, (0.55, 0.9)),
    appliance("microwave", true, HeightBand::High, (0.45, 0.35)),
    recep("cabinet", true, HeightBand::High, (0.5, 0.45)),
    recep("drawer", true, HeightBand::Low, (0.5, 0.3)),
    recep("safe", true, HeightBand::Low, (0.4, 0.4)),
    recep("countertop", false, HeightBand::Mid, (0.8, 0.35)),
    recep("sink", false, HeightBand::Mid, (0.5, 0.3)),
    recep("table", false, HeightBand::Mid, (0.8, 0.4)),
    recep("shelf", false, HeightBand::Mid, (0.6, 0.5)),
    fixture("lamp", HeightBand::Mid, (0.2, 0.5)),
    fixture("faucet", HeightBand::Mid, (0.1, 0.15)),
    item("apple", true, (0.12, 0.12)),
    item("potato", true, (0.12, 0.1)),
    item("tomato", true, (0.11, 0.11)),
    item("bread", true, (0.2, 0.12)),
    item("lettuce", true, (0.18, 0.15)),
    item("egg", false, (0.08, 0.1)),
    item("mug", false, (0.12, 0.14)),
    item("cup", false, (0.1, 0.14)),
    item("bowl", false, (0.18, 0.1)),
    item("plate", false, (0.22, 0.06)),
    item("spoon", false, (0.14, 0.04)),
    item("cd", false, (0.12, 0.12)),
    item("pen", false, (0.14, 0.03)),
    item("book", false, (0.16, 0.2)),
    item("keychain", false, (0.08, 0.06)),
    ClassSpec {
        name: "laptop",
        kind: ClassKind::Item,
        openable: true,
        toggleable: false,
        sliceable: false,
        band: HeightBand::Mid,
        size: (0.3, 0.2),
    },
    item("knife", false, (0.2, 0.04)),
];

/// Appliances whose contents change state; objects the agent leaves in them
/// are expected to be fetched again.
pub const APPLIANCES: &[&str] = &["fridge", "microwave", "sink"];

pub const KNIFE: &str = "knife";

pub fn lookup(name: &str) -> Option<&'static ClassSpec> {
    CLASSES.iter().find(|c| c.name == name)
}

pub fn is_class(name: &str) -> bool {
    lookup(name).is_some()
}

pub fn class_names() -> impl Iterator<Item = &'static str> {
    CLASSES.iter().map(|c| c.name)
}

pub fn receptacle_names() -> impl Iterator<Item = &'static str> {
    CLASSES.iter().filter(|c| c.kind == ClassKind::Receptacle).map(|c| c.name)
}

pub fn item_names() -> impl Iterator<Item = &'static str> {
    CLASSES.iter().filter(|c| c.kind == ClassKind::Item).map(|c| c.name)
}

pub fn is_receptacle(name: &str) -> bool {
    lookup(name).is_some_and(|c| c.kind == ClassKind::Receptacle)
}

pub fn is_openable(name: &str) -> bool {
    lookup(name).is_some_and(|c| c.openable)
}
