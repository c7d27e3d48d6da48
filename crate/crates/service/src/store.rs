//! Session files under a data directory, one per id, loaded lazily and
//! replaced atomically.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use mcda_mss::{format_session, parse_session, Session, Taxonomy};
use parking_lot::Mutex;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionRecord {
    pub id: String,
    pub session: Session,
    pub revision: u64,
    /// Unix seconds.
    pub created: u64,
    pub updated: u64,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("revision {given} is stale, the session is at revision {current}")]
    Conflict { given: u64, current: u64 },
    #[error("session `{id}` is unreadable: {message}")]
    Corrupt { id: String, message: String },
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
}

type Slot = Arc<Mutex<Option<SessionRecord>>>;

pub struct SessionStore {
    dir: PathBuf,
    tax: Arc<Taxonomy>,
    slots: Mutex<HashMap<String, Slot>>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Ids are simple-format v4 UUIDs; anything else never reaches the file system.
fn valid_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>, tax: Arc<Taxonomy>) -> Result<Self, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(SessionStore { dir, tax, slots: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.session"))
    }

    fn slot(&self, id: &str) -> Result<Slot, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        Ok(self.slots.lock().entry(id.to_string()).or_default().clone())
    }

    fn load_into(&self, id: &str, slot: &mut Option<SessionRecord>) -> Result<(), StoreError> {
        if slot.is_some() {
            return Ok(());
        }
        let text = match std::fs::read_to_string(self.path(id)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        *slot = Some(decode(&self.tax, id, &text)?);
        Ok(())
    }

    fn write(&self, rec: &SessionRecord) -> Result<(), StoreError> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(encode(&self.tax, rec).as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(&rec.id)).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn create(&self) -> Result<SessionRecord, StoreError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let t = now();
        let rec = SessionRecord { id: id.clone(), session: Session::new(), revision: 0, created: t, updated: t };
        let slot = self.slot(&id)?;
        let mut guard = slot.lock();
        self.write(&rec)?;
        *guard = Some(rec.clone());
        Ok(rec)
    }

    pub fn get(&self, id: &str) -> Result<SessionRecord, StoreError> {
        let slot = self.slot(id)?;
        let mut guard = slot.lock();
        self.load_into(id, &mut guard)?;
        Ok(guard.clone().expect("loaded above"))
    }

    /// Applies `f` when `revision` is current. The file is replaced before the
    /// in-memory copy, so a failed write leaves both at the old revision.
    pub fn update<E>(&self, id: &str, revision: u64, f: impl FnOnce(&Session) -> Result<Session, E>) -> Result<SessionRecord, E>
    where
        E: From<StoreError>,
    {
        let slot = self.slot(id)?;
        let mut guard = slot.lock();
        self.load_into(id, &mut guard)?;
        let cur = guard.as_ref().expect("loaded above");
        if cur.revision != revision {
            return Err(StoreError::Conflict { given: revision, current: cur.revision }.into());
        }
        let session = f(&cur.session)?;
        let next = SessionRecord { session, revision: cur.revision + 1, updated: now(), ..cur.clone() };
        self.write(&next)?;
        *guard = Some(next.clone());
        Ok(next)
    }
}

fn encode(tax: &Taxonomy, rec: &SessionRecord) -> String {
    format!(
        "# id: {}\n# revision: {}\n# created: {}\n# updated: {}\n{}",
        rec.id,
        rec.revision,
        rec.created,
        rec.updated,
        format_session(tax, &rec.session)
    )
}

fn decode(tax: &Taxonomy, id: &str, text: &str) -> Result<SessionRecord, StoreError> {
    let corrupt = |message: String| StoreError::Corrupt { id: id.to_string(), message };
    let header = |name: &str| -> Result<u64, StoreError> {
        let prefix = format!("# {name}:");
        text.lines()
            .find_map(|l| l.strip_prefix(&prefix))
            .ok_or_else(|| corrupt(format!("missing `{name}` header")))?
            .trim()
            .parse()
            .map_err(|e| corrupt(format!("bad `{name}` header: {e}")))
    };
    let session = parse_session(tax, text).map_err(|d| {
        let lines: Vec<String> = d.iter().map(|x| x.to_string()).collect();
        corrupt(lines.join("; "))
    })?;
    Ok(SessionRecord {
        id: id.to_string(),
        session,
        revision: header("revision")?,
        created: header("created")?,
        updated: header("updated")?,
    })
}
