pub(super) const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS banks (
    digest      TEXT PRIMARY KEY,
    item_count  INTEGER NOT NULL CHECK (item_count > 0)
);

CREATE TABLE IF NOT EXISTS listaprofi (
    teacher_id  INTEGER PRIMARY KEY AUTOINCREMENT,
    full_name   TEXT NOT NULL CHECK (length(trim(full_name)) > 0),
    photo       TEXT,
    chair_id    TEXT NOT NULL,
    faculty_id  TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS listaip (
    ip TEXT PRIMARY KEY
);

CREATE TABLE IF NOT EXISTS admin (
    username         TEXT PRIMARY KEY,
    password_digest  TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS stare (
    id                INTEGER PRIMARY KEY CHECK (id = 1),
    active            INTEGER NOT NULL DEFAULT 0,
    selected_teacher  INTEGER REFERENCES listaprofi (teacher_id),
    bank_digest       TEXT NOT NULL DEFAULT ''
);
INSERT OR IGNORE INTO stare (id) VALUES (1);

CREATE TABLE IF NOT EXISTS rezultate (
    result_id     INTEGER PRIMARY KEY AUTOINCREMENT,
    teacher_id    INTEGER NOT NULL,
    bank_digest   TEXT NOT NULL REFERENCES banks (digest),
    completed_at  TEXT NOT NULL,
    answers       TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS rezultate_teacher ON rezultate (teacher_id);

CREATE TABLE IF NOT EXISTS eval_sesiune (
    token        TEXT PRIMARY KEY,
    teacher_id   INTEGER NOT NULL,
    bank_digest  TEXT NOT NULL REFERENCES banks (digest),
    item_count   INTEGER NOT NULL,
    client_ip    TEXT,
    started_at   TEXT NOT NULL,
    phase        TEXT NOT NULL CHECK (phase IN ('active', 'completed', 'aborted')),
    answers      TEXT NOT NULL DEFAULT '',
    result_id    INTEGER UNIQUE REFERENCES rezultate (result_id),
    CHECK ((phase = 'completed') = (result_id IS NOT NULL)),
    CHECK (phase = 'active' OR client_ip IS NULL)
);
CREATE INDEX IF NOT EXISTS eval_sesiune_active_ip ON eval_sesiune (client_ip) WHERE phase = 'active';

CREATE TABLE IF NOT EXISTS role_keys (
    key_hash    TEXT PRIMARY KEY,
    role        TEXT NOT NULL CHECK (role IN ('dean', 'rector', 'evaluated_teacher')),
    teacher_id  INTEGER,
    issued_at   TEXT NOT NULL
);
"#;
