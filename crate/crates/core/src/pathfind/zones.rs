use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use super::Rect;
use crate::math::Vec2;
use crate::stagespace::Disposition;

/// A performance area: its footprint in the capture space B, its counterpart
/// in D and the facing the avatar takes when released there.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: String,
    pub rect_b: Rect,
    pub rect_d: Rect,
    #[serde(default)]
    pub release_yaw: f64,
}

impl Zone {
    pub fn landing(&self) -> Disposition {
        Disposition::new(self.rect_d.center(), self.release_yaw)
    }

    /// Proportional placement of a point of `rect_b` inside `rect_d`.
    pub fn map_b_to_d(&self, p: &Vec2) -> Vec2 {
        let u = (p - self.rect_b.min).component_div(&self.rect_b.size());
        self.rect_d.min + u.component_mul(&self.rect_d.size())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ZoneError {
    #[error("duplicate name {0:?}")]
    Duplicate(String),
    #[error("zone {0:?} has a degenerate rectangle")]
    Degenerate(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZoneMap {
    zones: Vec<Zone>,
}

impl ZoneMap {
    pub fn new(zones: Vec<Zone>) -> Result<Self, ZoneError> {
        for (i, z) in zones.iter().enumerate() {
            if zones[..i].iter().any(|o| o.id == z.id) {
                return Err(ZoneError::Duplicate(z.id.clone()));
            }
            if z.rect_b.is_degenerate() || z.rect_d.is_degenerate() {
                return Err(ZoneError::Degenerate(z.id.clone()));
            }
        }
        Ok(Self { zones })
    }

    pub fn get(&self, id: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.id == id)
    }

    /// First zone whose B footprint holds `p`.
    pub fn zone_of_b(&self, p: &Vec2) -> Option<&Zone> {
        self.zones.iter().find(|z| z.rect_b.contains(p))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Zone> {
        self.zones.iter()
    }
}

/// A named landing position and facing in D.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub position: [f64; 2],
    #[serde(default)]
    pub yaw: f64,
}

impl Preset {
    pub fn disposition(&self) -> Disposition {
        Disposition::new(Vec2::new(self.position[0], self.position[1]), self.yaw)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PresetTable {
    presets: BTreeMap<String, Preset>,
}

impl PresetTable {
    pub fn new(presets: BTreeMap<String, Preset>) -> Self {
        Self { presets }
    }

    pub fn insert(&mut self, name: &str, preset: Preset) -> Result<(), ZoneError> {
        if self.presets.contains_key(name) {
            return Err(ZoneError::Duplicate(name.to_owned()));
        }
        self.presets.insert(name.to_owned(), preset);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Preset> {
        self.presets.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.presets.keys().map(String::as_str)
    }

    /// Landing for `name`: a preset of that name, else the zone's D center
    /// with its release facing.
    pub fn resolve(&self, name: &str, zones: &ZoneMap) -> Option<Disposition> {
        self.get(name)
            .map(Preset::disposition)
            .or_else(|| zones.get(name).map(Zone::landing))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zone(id: &str, b: [f64; 4], d: [f64; 4], yaw: f64) -> Zone {
        Zone {
            id: id.into(),
            rect_b: b.into(),
            rect_d: d.into(),
            release_yaw: yaw,
        }
    }

    #[test]
    fn zone_map() {
        let zones = ZoneMap::new(vec![
            zone("Phys1", [0.0, 0.0, 2.0, 2.0], [0.0, 0.0, 4.0, 4.0], 0.0),
            zone("Phys2", [3.0, 0.0, 5.0, 2.0], [8.0, 0.0, 12.0, 4.0], 180.0),
        ])
        .unwrap();
        assert_eq!(zones.zone_of_b(&Vec2::new(4.0, 1.0)).unwrap().id, "Phys2");
        assert!(zones.zone_of_b(&Vec2::new(2.5, 1.0)).is_none());
        let z = zones.get("Phys2").unwrap();
        assert_eq!(z.map_b_to_d(&Vec2::new(3.5, 1.0)), Vec2::new(9.0, 2.0));
        assert_eq!(z.landing(), Disposition::new(Vec2::new(10.0, 2.0), 180.0));

        let dup = ZoneMap::new(vec![
            zone("A", [0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, 1.0], 0.0),
            zone("A", [0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, 1.0], 0.0),
        ]);
        assert_eq!(dup, Err(ZoneError::Duplicate("A".into())));
        let flat = ZoneMap::new(vec![zone("F", [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 1.0, 1.0], 0.0)]);
        assert_eq!(flat, Err(ZoneError::Degenerate("F".into())));
    }

    #[test]
    fn presets_shadow_zones() {
        let zones = ZoneMap::new(vec![zone("Dig2", [0.0, 0.0, 1.0, 1.0], [6.0, 6.0, 8.0, 8.0], 45.0)]).unwrap();
        let mut table = PresetTable::default();
        assert_eq!(
            table.resolve("Dig2", &zones),
            Some(Disposition::new(Vec2::new(7.0, 7.0), 45.0))
        );
        table
            .insert(
                "Dig2",
                Preset {
                    position: [1.0, 2.0],
                    yaw: -30.0,
                },
            )
            .unwrap();
        assert_eq!(
            table.resolve("Dig2", &zones),
            Some(Disposition::new(Vec2::new(1.0, 2.0), -30.0))
        );
        assert!(table
            .insert(
                "Dig2",
                Preset {
                    position: [0.0, 0.0],
                    yaw: 0.0
                }
            )
            .is_err());
        assert_eq!(table.resolve("nowhere", &zones), None);
    }
}
