"""
Run history for verification and benchmark runs using SQLAlchemy
"""
from sqlalchemy import create_engine, Column, Integer, String, Float, DateTime, ForeignKey, Index
from sqlalchemy.ext.declarative import declarative_base
from sqlalchemy.orm import sessionmaker, relationship
from datetime import datetime
from typing import Optional, List

Base = declarative_base()

STATUS_RUNNING = 'running'
STATUS_PASSED = 'passed'
STATUS_FAILED = 'failed'
STATUS_ERROR = 'error'


class Run(Base):
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True)
    command = Column(String, nullable=False)
    model_name = Column(String, nullable=False)
    order = Column(Integer)
    vmax = Column(Integer)
    precision = Column(String, default='double')
    seed = Column(Integer, default=0)
    status = Column(String, default=STATUS_RUNNING)
    exit_code = Column(Integer)
    started_at = Column(DateTime, default=datetime.utcnow)
    finished_at = Column(DateTime)

    metrics = relationship("Metric", back_populates="run", cascade="all, delete-orphan")

    __table_args__ = (
        Index('idx_runs_started', 'started_at'),
        Index('idx_runs_command', 'command'),
    )

    def __repr__(self):
        return f"<Run(command='{self.command}', model='{self.model_name}', status='{self.status}')>"

    @property
    def duration(self) -> Optional[float]:
        if self.finished_at is None or self.started_at is None:
            return None
        return (self.finished_at - self.started_at).total_seconds()


class Metric(Base):
    __tablename__ = 'metrics'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id'), nullable=False)
    name = Column(String, nullable=False)
    value = Column(Float, nullable=False)
    recorded_at = Column(DateTime, default=datetime.utcnow)

    run = relationship("Run", back_populates="metrics")

    __table_args__ = (
        Index('idx_metrics_name', 'name'),
    )

    def __repr__(self):
        return f"<Metric(name='{self.name}', value={self.value})>"


class RunStore:
    def __init__(self, db_path: str = "lindstedt_runs.db"):
        # Validate db_path is a string
        if not isinstance(db_path, str):
            raise TypeError(
                f"db_path must be a string, not {type(db_path).__name__}. "
                f"Got: {db_path!r}"
            )

        self.engine = create_engine(f'sqlite:///{db_path}')
        Base.metadata.create_all(self.engine)
        Session = sessionmaker(bind=self.engine)
        self.session = Session()

    def start_run(self, command: str, model_name: str, order: Optional[int] = None, vmax: Optional[int] = None,
                  precision: str = 'double', seed: int = 0) -> Run:
        """Record the start of a run"""
        run = Run(command=command, model_name=model_name, order=order, vmax=vmax,
                  precision=precision, seed=seed, status=STATUS_RUNNING)
        self.session.add(run)
        self.session.commit()
        return run

    def add_metric(self, run: Run, name: str, value: float) -> Metric:
        """Attach a named measurement to a run"""
        metric = Metric(run_id=run.id, name=name, value=float(value))
        self.session.add(metric)
        self.session.commit()
        return metric

    def finish_run(self, run: Run, exit_code: int, status: Optional[str] = None) -> Run:
        """Close a run with its exit code; the status follows the exit code unless given"""
        if status is None:
            status = {0: STATUS_PASSED, 1: STATUS_FAILED}.get(exit_code, STATUS_ERROR)
        run.exit_code = exit_code
        run.status = status
        run.finished_at = datetime.utcnow()
        self.session.commit()
        return run

    def get_runs(self, since: Optional[datetime] = None, command: Optional[str] = None,
                 limit: Optional[int] = None) -> List[Run]:
        """Runs, most recent first"""
        query = self.session.query(Run)
        if since is not None:
            query = query.filter(Run.started_at >= since)
        if command is not None:
            query = query.filter(Run.command == command)
        query = query.order_by(Run.started_at.desc(), Run.id.desc())
        if limit is not None:
            query = query.limit(limit)
        return query.all()

    def get_metrics(self, name: str) -> List[Metric]:
        """Every recorded value of a metric, oldest first"""
        return self.session.query(Metric).filter_by(name=name).order_by(Metric.recorded_at, Metric.id).all()

    def close(self):
        """Close database session"""
        self.session.close()


if __name__ == "__main__":
    store = RunStore(":memory:")
    run = store.start_run("bench", "ref1", order=4)
    store.add_metric(run, "trees_per_second", 1234.5)
    store.finish_run(run, 0)
    print(store.get_runs())
    print(store.get_metrics("trees_per_second"))
    store.close()
