use crate::gcode::{
    parse_command, print_time, to_toolpath, Command, GCodeProgram, ToolpathDefaults,
};
use crate::point::Point3;
use std::cell::Cell;
use std::collections::VecDeque;
use std::rc::Rc;
use std::time::{Duration, Instant};

/// Seconds since an origin.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Manually advanced clock; clones share the same time.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock(Rc<Cell<f64>>);

impl VirtualClock {
    pub fn advance_to(&self, t: f64) {
        if t > self.0.get() {
            self.0.set(t);
        }
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> f64 {
        self.0.get()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RealtimeClock(Instant);

impl Default for RealtimeClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for RealtimeClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Line channel to a printer. Every accepted line is answered with `ok`;
/// rejected lines are answered with a line starting `error:`.
pub trait PrinterPort {
    fn send(&mut self, line: &str);
    /// Next reply, or `None` if nothing arrives within `timeout` seconds.
    fn receive(&mut self, timeout: f64) -> Option<String>;
    fn clock(&self) -> Rc<dyn Clock>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    /// Time advances only when a barrier waits for queued motion.
    Virtual,
    /// Barriers sleep for the real motion time.
    Realtime,
}

/// In-process printer with a constant-velocity motion model. M400 is
/// acknowledged once all queued motion has finished.
pub struct SimulatedPrinter {
    mode: ClockMode,
    vclock: VirtualClock,
    rclock: RealtimeClock,
    commands: Vec<Command>,
    defaults: ToolpathDefaults,
    queued_time: f64,
    busy_until: f64,
    replies: VecDeque<String>,
    /// Stop answering after this many replies.
    reply_limit: Option<usize>,
    replies_sent: usize,
    received: Vec<String>,
}

impl SimulatedPrinter {
    pub fn new(initial_position: Point3, mode: ClockMode) -> Self {
        Self {
            mode,
            vclock: VirtualClock::default(),
            rclock: RealtimeClock::default(),
            commands: Vec::new(),
            defaults: ToolpathDefaults {
                position: Some(initial_position),
                ..Default::default()
            },
            queued_time: 0.0,
            busy_until: 0.0,
            replies: VecDeque::new(),
            reply_limit: None,
            replies_sent: 0,
            received: Vec::new(),
        }
    }

    /// Fault injection: go silent after `n` replies.
    pub fn with_reply_limit(mut self, n: usize) -> Self {
        self.reply_limit = Some(n);
        self
    }

    /// Every line received so far, verbatim.
    pub fn received(&self) -> &[String] {
        &self.received
    }

    fn now(&self) -> f64 {
        match self.mode {
            ClockMode::Virtual => self.vclock.now(),
            ClockMode::Realtime => self.rclock.now(),
        }
    }

    fn reply(&mut self, text: String) {
        if self.reply_limit.is_some_and(|n| self.replies_sent >= n) {
            return;
        }
        self.replies_sent += 1;
        self.replies.push_back(text);
    }

    fn wait_for_motion(&mut self) {
        match self.mode {
            ClockMode::Virtual => self.vclock.advance_to(self.busy_until),
            ClockMode::Realtime => {
                let left = self.busy_until - self.rclock.now();
                if left > 0.0 {
                    std::thread::sleep(Duration::from_secs_f64(left));
                }
            }
        }
    }

    fn accept(&mut self, line: &str) -> Result<(), String> {
        let idx = self.commands.len();
        let cmd = parse_command(line, idx + 1).map_err(|e| e.to_string())?;
        if cmd == Command::WaitMoves {
            self.wait_for_motion();
            return Ok(());
        }
        self.commands.push(cmd);
        let total = match to_toolpath(
            &GCodeProgram::from_commands(self.commands.clone()),
            self.defaults,
        ) {
            Ok(tp) => print_time(&tp),
            Err(e) => {
                self.commands.pop();
                return Err(e.to_string());
            }
        };
        let dur = total - self.queued_time;
        self.queued_time = total;
        self.busy_until = self.busy_until.max(self.now()) + dur;
        Ok(())
    }
}

impl PrinterPort for SimulatedPrinter {
    fn send(&mut self, line: &str) {
        self.received.push(line.to_string());
        match self.accept(line) {
            Ok(()) => self.reply("ok".into()),
            Err(e) => self.reply(format!("error: {e}")),
        }
    }

    fn receive(&mut self, _timeout: f64) -> Option<String> {
        self.replies.pop_front()
    }

    fn clock(&self) -> Rc<dyn Clock> {
        match self.mode {
            ClockMode::Virtual => Rc::new(self.vclock.clone()),
            ClockMode::Realtime => Rc::new(self.rclock),
        }
    }
}
