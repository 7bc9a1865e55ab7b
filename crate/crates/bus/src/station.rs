use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Mocaptor,
    Manipulator,
    DigitalArtist,
    Director,
    Server,
    Console,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Mocaptor,
        Role::Manipulator,
        Role::DigitalArtist,
        Role::Director,
        Role::Server,
        Role::Console,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Role::Mocaptor => "Mocaptor",
            Role::Manipulator => "Manipulator",
            Role::DigitalArtist => "DigitalArtist",
            Role::Director => "Director",
            Role::Server => "Server",
            Role::Console => "Console",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown role {0:?}")]
pub struct UnknownRole(pub String);

impl FromStr for Role {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| UnknownRole(s.to_owned()))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationDescriptor {
    pub id: u32,
    pub role: Role,
    /// Where the station can be reached; empty when it accepts no connections.
    pub address: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StationError {
    #[error("role {0} is already taken")]
    RoleTaken(Role),
    #[error("station id {0} is already registered")]
    DuplicateId(u32),
    #[error("no station with id {0}")]
    Unknown(u32),
}

/// Stations of one session. Ids are unique and there is at most one
/// director; every other role may repeat.
#[derive(Debug, Clone, Default)]
pub struct StationRegistry {
    stations: Vec<StationDescriptor>,
    next_id: u32,
}

impl StationRegistry {
    pub fn new() -> Self {
        Self {
            stations: Vec::new(),
            next_id: 1,
        }
    }

    /// Records a station under a fresh id.
    pub fn register(&mut self, role: Role, address: &str) -> Result<u32, StationError> {
        while self.stations.iter().any(|s| s.id == self.next_id) {
            self.next_id += 1;
        }
        let id = self.next_id;
        self.insert(StationDescriptor {
            id,
            role,
            address: address.to_owned(),
        })?;
        self.next_id += 1;
        Ok(id)
    }

    /// Records a station that already carries an id.
    pub fn insert(&mut self, descriptor: StationDescriptor) -> Result<(), StationError> {
        if self.stations.iter().any(|s| s.id == descriptor.id) {
            return Err(StationError::DuplicateId(descriptor.id));
        }
        if descriptor.role == Role::Director && self.stations.iter().any(|s| s.role == Role::Director) {
            return Err(StationError::RoleTaken(Role::Director));
        }
        self.stations.push(descriptor);
        Ok(())
    }

    pub fn remove(&mut self, id: u32) -> Result<StationDescriptor, StationError> {
        let at = self
            .stations
            .iter()
            .position(|s| s.id == id)
            .ok_or(StationError::Unknown(id))?;
        Ok(self.stations.remove(at))
    }

    pub fn get(&self, id: u32) -> Option<&StationDescriptor> {
        self.stations.iter().find(|s| s.id == id)
    }

    pub fn role_of(&self, id: u32) -> Option<Role> {
        self.get(id).map(|s| s.role)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StationDescriptor> {
        self.stations.iter()
    }
}
