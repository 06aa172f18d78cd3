"""
Schemas模块初始化
"""
from .model import BoundaryShorthand, Coefficient, ModelDocument
from .certificate import (
    SolveStatus,
    StabilityVerdict,
    BlockDiagnostic,
    ResidualOffender,
    VerifyReport,
    CertificateMetadata,
    CertificateDocument,
    ProbeRecord,
    MarginReport
)

__all__ = [
    'BoundaryShorthand',
    'Coefficient',
    'ModelDocument',
    'SolveStatus',
    'StabilityVerdict',
    'BlockDiagnostic',
    'ResidualOffender',
    'VerifyReport',
    'CertificateMetadata',
    'CertificateDocument',
    'ProbeRecord',
    'MarginReport'
]
