//! Organisational identifiers and the teacher → chair → faculty → university tree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TeacherId(pub i64);

impl fmt::Display for TeacherId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChairId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FacultyId(pub String);

impl fmt::Display for ChairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for FacultyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "scope", content = "id", rename_all = "snake_case")]
pub enum Scope {
    Teacher(TeacherId),
    Chair(ChairId),
    Faculty(FacultyId),
    University,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrgMapError {
    #[error("chair {chair} assigned to faculties {first} and {second}")]
    ChairInTwoFaculties { chair: ChairId, first: FacultyId, second: FacultyId },
    #[error("malformed org map: {0}")]
    Parse(String),
}

/// Placement of one teacher, as listed in an org map file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub teacher: TeacherId,
    pub chair: ChairId,
    pub faculty: FacultyId,
}

/// Org map file: `university` name plus `[[assignment]]` rows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrgMapFile {
    #[serde(default)]
    pub university: Option<String>,
    #[serde(default, rename = "assignment")]
    pub assignments: Vec<Assignment>,
}

impl OrgMapFile {
    pub fn parse(document: &str) -> Result<Self, OrgMapError> {
        toml::from_str(document).map_err(|e| OrgMapError::Parse(e.message().to_owned()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OrgMap {
    teacher_chair: BTreeMap<TeacherId, ChairId>,
    chair_faculty: BTreeMap<ChairId, FacultyId>,
}

impl OrgMap {
    /// Builds the tree from per-teacher placements, rejecting a chair that
    /// sits under two faculties.
    pub fn new<I>(assignments: I) -> Result<Self, OrgMapError>
    where
        I: IntoIterator<Item = Assignment>,
    {
        let mut map = OrgMap::default();
        for a in assignments {
            match map.chair_faculty.get(&a.chair) {
                Some(f) if *f != a.faculty => {
                    return Err(OrgMapError::ChairInTwoFaculties {
                        chair: a.chair,
                        first: f.clone(),
                        second: a.faculty,
                    })
                }
                Some(_) => {}
                None => {
                    map.chair_faculty.insert(a.chair.clone(), a.faculty);
                }
            }
            map.teacher_chair.insert(a.teacher, a.chair);
        }
        Ok(map)
    }

    pub fn chair_of(&self, teacher: TeacherId) -> Option<&ChairId> {
        self.teacher_chair.get(&teacher)
    }

    pub fn faculty_of_chair(&self, chair: &ChairId) -> Option<&FacultyId> {
        self.chair_faculty.get(chair)
    }

    pub fn teachers(&self) -> impl Iterator<Item = TeacherId> + '_ {
        self.teacher_chair.keys().copied()
    }

    pub fn chairs(&self) -> impl Iterator<Item = &ChairId> {
        self.chair_faculty.keys()
    }

    pub fn faculties(&self) -> BTreeSet<&FacultyId> {
        self.chair_faculty.values().collect()
    }

    pub fn chairs_in<'a>(&'a self, faculty: &'a FacultyId) -> impl Iterator<Item = &'a ChairId> + 'a {
        self.chair_faculty.iter().filter(move |(_, f)| *f == faculty).map(|(c, _)| c)
    }

    pub fn teachers_in<'a>(&'a self, chair: &'a ChairId) -> impl Iterator<Item = TeacherId> + 'a {
        self.teacher_chair.iter().filter(move |(_, c)| *c == chair).map(|(t, _)| *t)
    }

    /// Whether `scope` exists in the tree.
    pub fn resolves(&self, scope: &Scope) -> bool {
        match scope {
            Scope::Teacher(t) => self.teacher_chair.contains_key(t),
            Scope::Chair(c) => self.chair_faculty.contains_key(c),
            Scope::Faculty(f) => self.chair_faculty.values().any(|x| x == f),
            Scope::University => true,
        }
    }

    /// Whether `teacher` falls under `scope`.
    pub fn contains(&self, scope: &Scope, teacher: TeacherId) -> bool {
        let Some(chair) = self.teacher_chair.get(&teacher) else {
            return false;
        };
        match scope {
            Scope::Teacher(t) => *t == teacher,
            Scope::Chair(c) => c == chair,
            Scope::Faculty(f) => self.chair_faculty.get(chair) == Some(f),
            Scope::University => true,
        }
    }
}
