use crossbeam_channel::{bounded, unbounded};

use super::{Context, Job, Prepared};
use crate::agents::EvaluationVerdict;
use crate::skeleton::Skeleton;

/// How one wave of expansions is executed. Both modes produce identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dispatch {
    Inline,
    /// Formulation and evaluation workers joined by bounded queues.
    Pipeline {
        workers: usize,
    },
}

enum Event {
    Prepared { job: usize, prep: Prepared },
    Judged { job: usize, slot: usize, verdict: EvaluationVerdict },
}

impl Dispatch {
    pub(super) fn run(&self, ctx: &Context<'_>, jobs: &[Job<'_>]) -> Vec<(Prepared, Vec<EvaluationVerdict>)> {
        match *self {
            Dispatch::Inline => jobs
                .iter()
                .map(|job| {
                    let prep = ctx.prepare(job);
                    let verdicts = prep.admitted.iter().map(|a| ctx.judge(&a.skeleton)).collect();
                    (prep, verdicts)
                })
                .collect(),
            Dispatch::Pipeline { workers } => pipeline(ctx, jobs, workers),
        }
    }
}

fn pipeline(ctx: &Context<'_>, jobs: &[Job<'_>], workers: usize) -> Vec<(Prepared, Vec<EvaluationVerdict>)> {
    let mut preps: Vec<Option<Prepared>> = jobs.iter().map(|_| None).collect();
    let mut verdicts: Vec<Vec<Option<EvaluationVerdict>>> = jobs.iter().map(|_| Vec::new()).collect();
    let mut pending_verdicts = Vec::new();

    std::thread::scope(|s| {
        let (job_tx, job_rx) = bounded::<usize>(workers * 2);
        let (eval_tx, eval_rx) = bounded::<(usize, usize, Skeleton)>(workers * 4);
        let (event_tx, event_rx) = unbounded::<Event>();

        for _ in 0..workers {
            let (job_rx, eval_tx, event_tx) = (job_rx.clone(), eval_tx.clone(), event_tx.clone());
            s.spawn(move || {
                for k in job_rx {
                    let prep = ctx.prepare(&jobs[k]);
                    let queued: Vec<Skeleton> = prep.admitted.iter().map(|a| a.skeleton.clone()).collect();
                    let _ = event_tx.send(Event::Prepared { job: k, prep });
                    for (slot, sk) in queued.into_iter().enumerate() {
                        let _ = eval_tx.send((k, slot, sk));
                    }
                }
            });
        }
        drop(eval_tx);
        for _ in 0..workers {
            let (eval_rx, event_tx) = (eval_rx.clone(), event_tx.clone());
            s.spawn(move || {
                for (job, slot, sk) in eval_rx {
                    let verdict = ctx.judge(&sk);
                    let _ = event_tx.send(Event::Judged { job, slot, verdict });
                }
            });
        }
        drop(event_tx);

        s.spawn(move || {
            for k in 0..jobs.len() {
                if job_tx.send(k).is_err() {
                    break;
                }
            }
        });

        for event in event_rx {
            match event {
                Event::Prepared { job, prep } => preps[job] = Some(prep),
                Event::Judged { job, slot, verdict } => pending_verdicts.push((job, slot, verdict)),
            }
        }
    });

    for (job, prep) in preps.iter().enumerate() {
        let n = prep.as_ref().map_or(0, |p| p.admitted.len());
        verdicts[job] = (0..n).map(|_| None).collect();
    }
    for (job, slot, verdict) in pending_verdicts {
        verdicts[job][slot] = Some(verdict);
    }
    preps
        .into_iter()
        .zip(verdicts)
        .map(|(p, v)| (p.expect("every job is prepared"), v.into_iter().map(|x| x.expect("every admitted child is judged")).collect()))
        .collect()
}
