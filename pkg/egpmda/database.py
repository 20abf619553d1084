from datetime import datetime, timezone
import json
import secrets

from flask_sqlalchemy import SQLAlchemy

# Create the db instance here
db = SQLAlchemy()


class RunLog(db.Model):
    __tablename__ = 'run_logs'

    id = db.Column(db.String(36), primary_key=True, default=lambda: secrets.token_urlsafe(16))
    action = db.Column(db.String(50), nullable=False, index=True)
    status = db.Column(db.Enum('ok', 'failed', name='run_status'), nullable=False)
    code = db.Column(db.String(50))
    details = db.Column(db.Text)
    seed = db.Column(db.Integer)
    out_dir = db.Column(db.String(500))
    created_at = db.Column(db.DateTime, default=lambda: datetime.now(timezone.utc))

    def to_dict(self):
        return {
            'id': self.id,
            'action': self.action,
            'status': self.status,
            'code': self.code,
            'details': json.loads(self.details) if self.details else None,
            'seed': self.seed,
            'outDir': self.out_dir,
            'createdAt': self.created_at.isoformat() if self.created_at else None
        }
