"""Per-volume session state and background training jobs.

Each session serializes mutations behind a lock; training runs in a
worker thread that publishes progress through its job ticket.  A session
reaches "done" only when its training thread completes (or a cache hit
supplies the features directly).
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from ..cache import FeatureCache
from ..forest import ScribbleSet
from ..inr import InrFeatures
from ..render import TransferFunctionSet
from ..volume import ScalarVolume, compute_derived_fields


class SessionError(RuntimeError):
    def __init__(self, status: int, detail):
        super().__init__(str(detail))
        self.status = status
        self.detail = detail


@dataclass
class JobTicket:
    id: str
    kind: str
    state: str = "idle"                   # idle | running | done | failed
    progress: float = 0.0
    epoch_losses: list = field(default_factory=list)
    error: str = None
    started_at: float = None
    finished_at: float = None
    cache_hit: bool = None

    def snapshot(self) -> dict:
        return {"id": self.id, "kind": self.kind, "state": self.state,
                "progress": self.progress,
                "epoch_losses": self.epoch_losses[-25:],
                "error": self.error, "started_at": self.started_at,
                "finished_at": self.finished_at, "cache_hit": self.cache_hit}


@dataclass
class Session:
    volume_id: str
    volume: ScalarVolume
    lock: threading.Lock = field(default_factory=threading.Lock)
    job: JobTicket = None
    estimator: InrFeatures = None
    features = None
    fields = None
    scribbles: ScribbleSet = None
    forest = None
    prob_volume = None
    tf_set: TransferFunctionSet = None
    tf_mode: str = "probability_intensity"

    @property
    def training_state(self) -> str:
        return self.job.state if self.job else "idle"


class SessionStore:
    def __init__(self, cache_dir=None):
        self._sessions = {}
        self._jobs = {}
        self._lock = threading.Lock()
        self.cache = FeatureCache(cache_dir) if cache_dir else None

    def add(self, volume: ScalarVolume) -> Session:
        vid = uuid.uuid4().hex[:12]
        session = Session(vid, volume)
        with self._lock:
            self._sessions[vid] = session
        return session

    def get(self, volume_id: str) -> Session:
        session = self._sessions.get(volume_id)
        if session is None:
            raise SessionError(404, f"unknown volume id '{volume_id}'")
        return session

    def job(self, job_id: str) -> JobTicket:
        ticket = self._jobs.get(job_id)
        if ticket is None:
            raise SessionError(404, f"unknown job id '{job_id}'")
        return ticket

    def start_training(self, session: Session, estimator: InrFeatures) -> JobTicket:
        with session.lock:
            if session.job is not None and session.job.state == "running":
                raise SessionError(409, {"message": "training already running",
                                         "state": "running",
                                         "job": session.job.id})
            ticket = JobTicket(uuid.uuid4().hex[:12], "train", state="running",
                               started_at=time.time())
            session.job = ticket
            session.estimator = estimator
            session.features = None
            session.forest = None
            session.prob_volume = None
        with self._lock:
            self._jobs[ticket.id] = ticket

        def progress(epoch, total, losses):
            ticket.progress = epoch / max(total, 1)
            ticket.epoch_losses.append({"epoch": epoch, **losses})

        def run():
            try:
                if self.cache is not None:
                    features, _, hit = self.cache.get_or_train(
                        session.volume, estimator, progress_cb=progress)
                    ticket.cache_hit = hit
                else:
                    estimator.fit(session.volume, progress_cb=progress)
                    features = estimator.transform()
                    ticket.cache_hit = False
                fields = compute_derived_fields(session.volume,
                                                estimator.patch_side)
                with session.lock:
                    session.features = features
                    session.fields = fields
                ticket.progress = 1.0
                ticket.state = "done"
            except Exception as exc:       # noqa: BLE001 - reported via ticket
                ticket.error = f"{type(exc).__name__}: {exc}"
                ticket.state = "failed"
            finally:
                ticket.finished_at = time.time()

        threading.Thread(target=run, name=f"train-{session.volume_id}",
                         daemon=True).start()
        return ticket

    def require_features(self, session: Session):
        state = session.training_state
        if state != "done" or session.features is None:
            raise SessionError(409, {"message": "features not ready",
                                     "state": state})
        return session.features
