//! Ten-lesson curriculum over terrain difficulty.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const LESSON_COUNT: usize = 10;
pub const MIN_LESSON_LENGTH: u32 = 100;
pub const DEFAULT_SMOOTHING: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lesson {
    pub name: String,
    /// Smoothed reward needed to move on; `None` for the last lesson.
    pub threshold: Option<f64>,
    pub min_length: u32,
    /// Difficulty while this lesson is active.
    pub value: u8,
}

/// Lessons 1 to 10 with thresholds 900, 950, ..., 1300.
pub fn default_lessons() -> Vec<Lesson> {
    (0..LESSON_COUNT)
        .map(|i| Lesson {
            name: alloc::format!("Lesson{}", i + 1),
            threshold: (i + 1 < LESSON_COUNT).then(|| 900.0 + 50.0 * i as f64),
            min_length: MIN_LESSON_LENGTH,
            value: i as u8 + 1,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    /// Zero-based index into the lesson table.
    pub lesson: usize,
    pub episodes_in_lesson: u32,
    pub smoothed_reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub smoothed_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub lessons: Vec<Lesson>,
    pub smoothing: f64,
    pub state: CurriculumState,
}

impl Default for Curriculum {
    fn default() -> Self {
        Self::new(default_lessons(), DEFAULT_SMOOTHING)
    }
}

impl Curriculum {
    pub fn new(lessons: Vec<Lesson>, smoothing: f64) -> Self {
        Self {
            lessons,
            smoothing,
            state: CurriculumState {
                lesson: 0,
                episodes_in_lesson: 0,
                smoothed_reward: 0.0,
            },
        }
    }

    pub fn current_difficulty(&self) -> u8 {
        self.lessons[self.state.lesson].value
    }

    pub fn is_final(&self) -> bool {
        self.state.lesson + 1 >= self.lessons.len()
    }

    /// Folds in one finished episode; returns the transition if the lesson
    /// advanced.
    pub fn update(&mut self, episode_reward: f64) -> Option<Transition> {
        let s = &mut self.state;
        s.episodes_in_lesson += 1;
        s.smoothed_reward = self.smoothing * s.smoothed_reward + (1.0 - self.smoothing) * episode_reward;
        let lesson = &self.lessons[s.lesson];
        let ready = s.episodes_in_lesson >= lesson.min_length
            && lesson.threshold.is_some_and(|th| s.smoothed_reward >= th)
            && s.lesson + 1 < self.lessons.len();
        if !ready {
            return None;
        }
        let from = s.lesson;
        s.lesson += 1;
        s.episodes_in_lesson = 0;
        Some(Transition {
            from,
            to: s.lesson,
            smoothed_reward: s.smoothed_reward,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Curriculum with smoothing off so the stream value is the signal.
    fn raw() -> Curriculum {
        Curriculum::new(default_lessons(), 0.0)
    }

    #[test]
    fn lesson_table() {
        let l = default_lessons();
        assert_eq!(l.len(), 10);
        let th: Vec<f64> = l.iter().filter_map(|x| x.threshold).collect();
        assert_eq!(th, [900.0, 950.0, 1000.0, 1050.0, 1100.0, 1150.0, 1200.0, 1250.0, 1300.0]);
        assert!(l[9].threshold.is_none());
        assert!(l.iter().enumerate().all(|(i, x)| x.value as usize == i + 1 && x.min_length == 100));
    }

    #[test]
    fn min_length_blocks_early_advance() {
        let mut c = raw();
        for _ in 0..99 {
            assert!(c.update(2000.0).is_none());
        }
        assert_eq!(c.current_difficulty(), 1);
        assert!(c.update(2000.0).is_some());
        assert_eq!(c.current_difficulty(), 2);
    }

    #[test]
    fn threshold_is_inclusive() {
        let mut c = raw();
        for _ in 0..150 {
            assert!(c.update(899.9).is_none());
        }
        let tr = c.update(900.0).unwrap();
        assert_eq!((tr.from, tr.to), (0, 1));
        assert_eq!(c.state.episodes_in_lesson, 0);
    }

    #[test]
    fn final_lesson_never_advances() {
        let mut c = raw();
        let mut n = 0;
        for _ in 0..5000 {
            if c.update(1e9).is_some() {
                n += 1;
            }
        }
        assert_eq!(n, 9);
        assert_eq!(c.current_difficulty(), 10);
        assert_eq!(c.state.lesson, 9);
    }

    #[test]
    fn smoothing_is_exponential() {
        let mut c = Curriculum::default();
        c.update(1000.0);
        assert!((c.state.smoothed_reward - 10.0).abs() < 1e-12);
        c.update(1000.0);
        assert!((c.state.smoothed_reward - 19.9).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn advances_only_when_both_conditions_hold(
            stream in proptest::collection::vec(0.0f64..2000.0, 0..1500),
            smoothing in 0.0f64..0.999,
        ) {
            let mut c = Curriculum::new(default_lessons(), smoothing);
            for r in stream {
                let before = c.state;
                let tr = c.update(r);
                prop_assert!(c.state.lesson >= before.lesson);
                if let Some(tr) = tr {
                    prop_assert_eq!(tr.to, tr.from + 1);
                    prop_assert!(before.episodes_in_lesson + 1 >= 100);
                    prop_assert!(tr.smoothed_reward >= c.lessons[tr.from].threshold.unwrap());
                } else if before.lesson + 1 < c.lessons.len() {
                    let th = c.lessons[before.lesson].threshold;
                    let both = before.episodes_in_lesson + 1 >= 100
                        && th.is_some_and(|th| c.state.smoothed_reward >= th);
                    prop_assert!(!both);
                }
            }
        }
    }
}
