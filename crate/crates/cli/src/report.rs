//! Human-readable verification report. Rendering is deterministic (no
//! timestamps, no environment), so regenerating from the same results
//! yields identical bytes.

use std::path::Path;

#[derive(Debug, Clone)]
pub struct CheckLine {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub model_id: String,
    pub files: Vec<String>,
    pub checks: Vec<CheckLine>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn add_file(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    pub fn add_check(&mut self, label: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckLine {
            label: label.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn add_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("verification report\n");
        out.push_str(&format!("model: {}\n", self.model_id));
        out.push_str("\nfiles:\n");
        out.push_str("  report.txt\n");
        for f in &self.files {
            out.push_str(&format!("  {f}\n"));
        }
        out.push_str("\nchecks:\n");
        for c in &self.checks {
            let tag = if c.passed { "[PASS]" } else { "[FAIL]" };
            out.push_str(&format!("  {tag} {}: {}\n", c.label, c.detail));
        }
        if !self.notes.is_empty() {
            out.push_str("\nnotes:\n");
            for n in &self.notes {
                out.push_str(&format!("  {n}\n"));
            }
        }
        out.push_str(&format!(
            "\noverall: {}\n",
            if self.all_passed() { "PASS" } else { "FAIL" }
        ));
        out
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join("report.txt"), self.render())
    }

    pub fn print(&self) {
        for c in &self.checks {
            let tag = if c.passed { "[PASS]" } else { "[FAIL]" };
            println!("{tag} {}: {}", c.label, c.detail);
        }
        for n in &self.notes {
            println!("note: {n}");
        }
        println!("overall: {}", if self.all_passed() { "PASS" } else { "FAIL" });
    }
}
