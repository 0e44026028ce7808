use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::PathBuf;
use std::sync::Mutex;

use crate::org::TeacherId;

/// Largest accepted photo upload.
pub const MAX_PHOTO_BYTES: usize = 2 * 1024 * 1024;

const JPEG_MAGIC: [u8; 3] = [0xFF, 0xD8, 0xFF];

/// Checks the JPEG signature and the size cap.
pub fn validate_jpeg(bytes: &[u8]) -> Result<(), String> {
    if bytes.len() > MAX_PHOTO_BYTES {
        return Err(format!("photo is {} bytes; the limit is {MAX_PHOTO_BYTES}", bytes.len()));
    }
    if !bytes.starts_with(&JPEG_MAGIC) {
        return Err("photo is not a JPEG file".into());
    }
    Ok(())
}

pub(super) enum PhotoArea {
    Dir(PathBuf),
    Memory(Mutex<HashMap<String, Vec<u8>>>),
}

impl PhotoArea {
    pub(super) fn blob_name(teacher: TeacherId) -> String {
        format!("{teacher}.jpg")
    }

    pub(super) fn write(&self, name: &str, bytes: &[u8]) -> io::Result<()> {
        match self {
            PhotoArea::Dir(dir) => {
                let tmp = dir.join(format!("{name}.tmp"));
                fs::write(&tmp, bytes)?;
                fs::rename(tmp, dir.join(name))
            }
            PhotoArea::Memory(map) => {
                map.lock().unwrap_or_else(|e| e.into_inner()).insert(name.to_owned(), bytes.to_vec());
                Ok(())
            }
        }
    }

    pub(super) fn read(&self, name: &str) -> io::Result<Option<Vec<u8>>> {
        match self {
            PhotoArea::Dir(dir) => match fs::read(dir.join(name)) {
                Ok(b) => Ok(Some(b)),
                Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(e),
            },
            PhotoArea::Memory(map) => Ok(map.lock().unwrap_or_else(|e| e.into_inner()).get(name).cloned()),
        }
    }

    pub(super) fn remove(&self, name: &str) -> io::Result<()> {
        match self {
            PhotoArea::Dir(dir) => match fs::remove_file(dir.join(name)) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
                _ => Ok(()),
            },
            PhotoArea::Memory(map) => {
                map.lock().unwrap_or_else(|e| e.into_inner()).remove(name);
                Ok(())
            }
        }
    }
}
