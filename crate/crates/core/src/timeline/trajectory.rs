use std::fmt;

use crate::value::{cmp_rational, format_rational, midpoint, Rational, Value};

use super::TimelineError;

/// Which value to read at a moment: the point value, or the limit from the
/// right (`t+`) or from the left (`t−`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    At,
    Plus,
    Minus,
}

/// A time set bounded by two rationals, each end open or closed. A single
/// moment is the closed span `[t, t]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: Rational,
    pub end: Rational,
    pub start_closed: bool,
    pub end_closed: bool,
}

impl Span {
    pub fn new(start: Rational, end: Rational, start_closed: bool, end_closed: bool) -> Self {
        Span {
            start,
            end,
            start_closed,
            end_closed,
        }
    }

    pub fn point(t: Rational) -> Self {
        Span::new(t.clone(), t, true, true)
    }

    pub fn open(a: Rational, b: Rational) -> Self {
        Span::new(a, b, false, false)
    }

    pub fn closed(a: Rational, b: Rational) -> Self {
        Span::new(a, b, true, true)
    }

    pub fn closed_open(a: Rational, b: Rational) -> Self {
        Span::new(a, b, true, false)
    }

    pub fn open_closed(a: Rational, b: Rational) -> Self {
        Span::new(a, b, false, true)
    }

    pub fn is_point(&self) -> bool {
        self.start == self.end && self.start_closed && self.end_closed
    }

    pub fn is_empty(&self) -> bool {
        self.start > self.end || (self.start == self.end && !(self.start_closed && self.end_closed))
    }

    pub fn contains(&self, t: &Rational) -> bool {
        let lo = if self.start_closed {
            *t >= self.start
        } else {
            *t > self.start
        };
        let hi = if self.end_closed {
            *t <= self.end
        } else {
            *t < self.end
        };
        lo && hi
    }

    pub fn intersect(&self, other: &Span) -> Span {
        let (start, start_closed) = match self.start.cmp(&other.start) {
            std::cmp::Ordering::Less => (other.start.clone(), other.start_closed),
            std::cmp::Ordering::Greater => (self.start.clone(), self.start_closed),
            std::cmp::Ordering::Equal => {
                (self.start.clone(), self.start_closed && other.start_closed)
            }
        };
        let (end, end_closed) = match self.end.cmp(&other.end) {
            std::cmp::Ordering::Less => (self.end.clone(), self.end_closed),
            std::cmp::Ordering::Greater => (other.end.clone(), other.end_closed),
            std::cmp::Ordering::Equal => (self.end.clone(), self.end_closed && other.end_closed),
        };
        Span::new(start, end, start_closed, end_closed)
    }

    pub fn length(&self) -> Rational {
        &self.end - &self.start
    }

    /// A moment strictly inside the span, or its only moment.
    pub fn sample(&self) -> Rational {
        if self.start == self.end {
            self.start.clone()
        } else {
            midpoint(&self.start, &self.end)
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            return f.write_str(&format_rational(&self.start));
        }
        write!(
            f,
            "{}{}, {}{}",
            if self.start_closed { '[' } else { '(' },
            format_rational(&self.start),
            format_rational(&self.end),
            if self.end_closed { ']' } else { ')' },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Breakpoint {
    pub time: Rational,
    /// Value at `time` itself.
    pub at: Value,
    /// Value on the open segment to the right of `time`.
    pub right: Value,
}

impl Breakpoint {
    pub fn new(time: Rational, at: Value, right: Value) -> Self {
        Breakpoint { time, at, right }
    }
}

/// A maximal piece of a trajectory on which the value is constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub span: Span,
    pub value: Value,
}

/// A piecewise-constant function on `[0, horizon]`.
///
/// Breakpoints are strictly increasing and start at 0. In canonical form no
/// breakpoint after 0 is redundant, i.e. each one changes the value either
/// at the point or just after it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    horizon: Rational,
    points: Vec<Breakpoint>,
}

impl Trajectory {
    pub fn constant(horizon: Rational, value: Value) -> Self {
        Trajectory {
            horizon,
            points: vec![Breakpoint::new(
                Rational::from_integer(0.into()),
                value.clone(),
                value,
            )],
        }
    }

    /// Validates ordering and canonicalizes.
    pub fn from_breakpoints(
        horizon: Rational,
        points: Vec<Breakpoint>,
    ) -> Result<Self, TimelineError> {
        let t = Trajectory::from_raw(horizon, points);
        t.check_shape()?;
        Ok(t.canonical())
    }

    /// No validation or canonicalization; for building deliberately broken
    /// runs.
    pub fn from_raw(horizon: Rational, points: Vec<Breakpoint>) -> Self {
        Trajectory { horizon, points }
    }

    pub(crate) fn check_shape(&self) -> Result<(), TimelineError> {
        let malformed = |m: String| Err(TimelineError::Malformed(m));
        match self.points.first() {
            None => return malformed("trajectory has no breakpoints".into()),
            Some(b) if b.time != Rational::from_integer(0.into()) => {
                return malformed(format!(
                    "first breakpoint is {} instead of 0",
                    format_rational(&b.time)
                ))
            }
            _ => {}
        }
        for w in self.points.windows(2) {
            if w[0].time >= w[1].time {
                return malformed(format!(
                    "breakpoints {} and {} are not increasing",
                    format_rational(&w[0].time),
                    format_rational(&w[1].time)
                ));
            }
        }
        let last = &self.points[self.points.len() - 1].time;
        if *last > self.horizon {
            return malformed(format!(
                "breakpoint {} lies beyond the horizon {}",
                format_rational(last),
                format_rational(&self.horizon)
            ));
        }
        Ok(())
    }

    pub fn horizon(&self) -> &Rational {
        &self.horizon
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.points
    }

    pub fn initial(&self) -> &Value {
        &self.points[0].at
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn canonicalize(&mut self) {
        let mut out: Vec<Breakpoint> = Vec::with_capacity(self.points.len());
        for bp in self.points.drain(..) {
            if let Some(prev) = out.last() {
                if prev.right == bp.at && bp.at == bp.right {
                    continue;
                }
            }
            out.push(bp);
        }
        self.points = out;
    }

    pub fn is_canonical(&self) -> bool {
        self.clone().canonical() == *self
    }

    /// Index of the last breakpoint at or before `t`.
    fn index_at_or_before(&self, t: &Rational) -> usize {
        match self.points.binary_search_by(|b| cmp_rational(&b.time, t)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    pub fn value_at(&self, t: &Rational, side: Side) -> Result<Value, TimelineError> {
        let zero = Rational::from_integer(0.into());
        if *t < zero || *t > self.horizon || (side == Side::Minus && *t == zero) {
            return Err(TimelineError::OutOfHorizon {
                time: t.clone(),
                horizon: self.horizon.clone(),
            });
        }
        Ok(self.value_unchecked(t, side))
    }

    /// Like `value_at` but extends the last segment past the horizon.
    pub(crate) fn value_unchecked(&self, t: &Rational, side: Side) -> Value {
        let i = self.index_at_or_before(t);
        let bp = &self.points[i];
        if bp.time != *t {
            return bp.right.clone();
        }
        match side {
            Side::At => bp.at.clone(),
            Side::Plus => bp.right.clone(),
            Side::Minus if i > 0 => self.points[i - 1].right.clone(),
            Side::Minus => bp.at.clone(),
        }
    }

    /// Moments where the value changes between `t` and `t+`.
    pub fn right_changes(&self) -> impl Iterator<Item = &Breakpoint> {
        self.points.iter().filter(|b| b.at != b.right)
    }

    /// Moments `t > 0` where the value changes between `t−` and `t`.
    pub fn left_changes(&self) -> impl Iterator<Item = &Breakpoint> {
        self.points
            .windows(2)
            .filter(|w| w[0].right != w[1].at)
            .map(|w| &w[1])
    }

    /// Alternating points and open segments covering `[0, horizon]`.
    pub fn pieces(&self) -> Vec<Piece> {
        let mut out = Vec::with_capacity(self.points.len() * 2);
        for (i, bp) in self.points.iter().enumerate() {
            out.push(Piece {
                span: Span::point(bp.time.clone()),
                value: bp.at.clone(),
            });
            match self.points.get(i + 1) {
                Some(next) => out.push(Piece {
                    span: Span::open(bp.time.clone(), next.time.clone()),
                    value: bp.right.clone(),
                }),
                None if bp.time < self.horizon => out.push(Piece {
                    span: Span::open_closed(bp.time.clone(), self.horizon.clone()),
                    value: bp.right.clone(),
                }),
                None => {}
            }
        }
        out
    }

    /// Pieces clipped to `span`, dropping empty intersections.
    pub fn pieces_within(&self, span: &Span) -> Vec<Piece> {
        self.pieces()
            .into_iter()
            .filter_map(|p| {
                let s = p.span.intersect(span);
                (!s.is_empty()).then_some(Piece {
                    span: s,
                    value: p.value,
                })
            })
            .collect()
    }

    /// First stretch inside `span` whose value fails `pred`.
    pub fn first_violation(&self, span: &Span, pred: impl Fn(&Value) -> bool) -> Option<Piece> {
        self.pieces_within(span)
            .into_iter()
            .find(|p| !pred(&p.value))
    }

    fn split_at(&mut self, t: &Rational) {
        if *t < Rational::from_integer(0.into()) || *t > self.horizon {
            return;
        }
        let i = self.index_at_or_before(t);
        if self.points[i].time != *t {
            let v = self.points[i].right.clone();
            self.points
                .insert(i + 1, Breakpoint::new(t.clone(), v.clone(), v));
        }
    }

    /// Sets the value to `v` throughout `span` (clipped to the horizon).
    pub fn overwrite(&mut self, span: &Span, v: Value) {
        if span.is_empty() {
            return;
        }
        self.split_at(&span.start);
        self.split_at(&span.end);
        let n = self.points.len();
        for i in 0..n {
            let t = self.points[i].time.clone();
            if span.contains(&t) {
                self.points[i].at = v.clone();
            }
            let seg_end = match self.points.get(i + 1) {
                Some(next) => next.time.clone(),
                None => self.horizon.clone(),
            };
            if t < seg_end && span.start <= t && seg_end <= span.end {
                self.points[i].right = v.clone();
            }
        }
        self.canonicalize();
    }

    /// Builds a trajectory by sampling `f` at each of `moments` (sorted,
    /// starting at 0) and once inside every gap between them.
    pub fn sample<E>(
        horizon: Rational,
        moments: &[Rational],
        mut f: impl FnMut(&Rational) -> Result<Value, E>,
    ) -> Result<Trajectory, E> {
        let mut points = Vec::with_capacity(moments.len());
        for (i, m) in moments.iter().enumerate() {
            let at = f(m)?;
            let right = match moments.get(i + 1) {
                Some(next) => f(&midpoint(m, next))?,
                None if *m < horizon => f(&midpoint(m, &horizon))?,
                None => at.clone(),
            };
            points.push(Breakpoint::new(m.clone(), at, right));
        }
        Ok(Trajectory { horizon, points }.canonical())
    }

    /// Pointwise combination of two trajectories over the same horizon.
    pub fn zip_with(&self, other: &Trajectory, f: impl Fn(&Value, &Value) -> Value) -> Trajectory {
        let mut times: Vec<Rational> = self
            .points
            .iter()
            .chain(other.points.iter())
            .map(|b| b.time.clone())
            .collect();
        times.sort();
        times.dedup();
        let horizon = self.horizon.clone().max(other.horizon.clone());
        let r: Result<_, std::convert::Infallible> = Trajectory::sample(horizon, &times, |t| {
            Ok(f(
                &self.value_unchecked(t, Side::At),
                &other.value_unchecked(t, Side::At),
            ))
        });
        match r {
            Ok(t) => t,
            Err(e) => match e {},
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{int, rat};

    fn atom(s: &str) -> Value {
        Value::atom(s)
    }

    fn dir() -> Trajectory {
        Trajectory::from_breakpoints(
            int(40),
            vec![
                Breakpoint::new(int(0), atom("open"), atom("open")),
                Breakpoint::new(int(13), atom("open"), atom("close")),
                Breakpoint::new(int(22), atom("close"), atom("open")),
            ],
        )
        .unwrap()
    }

    #[test]
    fn limits_at_breakpoints() {
        let d = dir();
        assert_eq!(d.value_at(&int(13), Side::At).unwrap(), atom("open"));
        assert_eq!(d.value_at(&int(13), Side::Plus).unwrap(), atom("close"));
        assert_eq!(d.value_at(&int(13), Side::Minus).unwrap(), atom("open"));
        assert_eq!(d.value_at(&int(22), Side::Minus).unwrap(), atom("close"));
    }

    #[test]
    fn interior_point_has_equal_limits() {
        let d = dir();
        let t = rat(31, 2);
        for side in [Side::At, Side::Plus, Side::Minus] {
            assert_eq!(d.value_at(&t, side).unwrap(), atom("close"));
        }
    }

    #[test]
    fn out_of_horizon() {
        let d = dir();
        assert!(d.value_at(&int(41), Side::At).is_err());
        assert!(d.value_at(&int(0), Side::Minus).is_err());
        assert!(d.value_at(&int(-1), Side::Plus).is_err());
    }

    #[test]
    fn canonical_form_drops_redundant_breakpoints() {
        let t = Trajectory::from_breakpoints(
            int(10),
            vec![
                Breakpoint::new(int(0), atom("a"), atom("a")),
                Breakpoint::new(int(3), atom("a"), atom("a")),
                Breakpoint::new(int(5), atom("b"), atom("a")),
            ],
        )
        .unwrap();
        assert_eq!(t.breakpoints().len(), 2);
        assert!(t.is_canonical());
    }

    #[test]
    fn rejects_unordered_breakpoints() {
        let r = Trajectory::from_breakpoints(
            int(10),
            vec![
                Breakpoint::new(int(0), atom("a"), atom("a")),
                Breakpoint::new(int(5), atom("b"), atom("b")),
                Breakpoint::new(int(5), atom("c"), atom("c")),
            ],
        );
        assert!(r.is_err());
    }

    #[test]
    fn overwrite_open_interval() {
        let mut d = dir();
        d.overwrite(&Span::open(int(16), int(17)), atom("open"));
        assert_eq!(d.value_at(&int(16), Side::At).unwrap(), atom("close"));
        assert_eq!(d.value_at(&int(16), Side::Plus).unwrap(), atom("open"));
        assert_eq!(d.value_at(&int(17), Side::Minus).unwrap(), atom("open"));
        assert_eq!(d.value_at(&int(17), Side::At).unwrap(), atom("close"));
        assert!(d.is_canonical());
        d.overwrite(&Span::open(int(16), int(17)), atom("close"));
        assert_eq!(d, dir());
    }

    #[test]
    fn overwrite_to_horizon() {
        let mut d = dir();
        d.overwrite(&Span::open_closed(int(13), int(40)), atom("open"));
        assert_eq!(d, Trajectory::constant(int(40), atom("open")));
    }

    #[test]
    fn pieces_cover_the_horizon() {
        let pieces = dir().pieces();
        assert_eq!(pieces.len(), 6);
        assert_eq!(pieces[5].span, Span::open_closed(int(22), int(40)));
    }

    #[test]
    fn span_intersection() {
        let a = Span::closed_open(int(2), int(5));
        let b = Span::open_closed(int(2), int(4));
        assert_eq!(a.intersect(&b), Span::open_closed(int(2), int(4)));
        assert!(Span::open(int(3), int(3)).is_empty());
        assert!(!Span::point(int(3)).is_empty());
    }
}
