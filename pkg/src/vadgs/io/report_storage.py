import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..densifier import DensificationReport

REPORT_VERSION = "1.0"


class ReportStorage:
    """JSON storage for densification reports and run summaries.

    Output is deterministic: keys are sorted and no wall-clock time is
    recorded, so identical runs produce identical files.
    """

    def __init__(self, storage_path: str = "output/report.json"):
        self.storage_path = Path(storage_path)
        self.storage_path.parent.mkdir(parents=True, exist_ok=True)

    def _empty(self) -> Dict[str, Any]:
        return {"reports": [], "summary": {}, "metadata": {"version": REPORT_VERSION}}

    def load_data(self) -> Dict[str, Any]:
        """Load all report data from storage"""
        try:
            with open(self.storage_path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (json.JSONDecodeError, FileNotFoundError):
            return self._empty()

    def save_data(self, data: Dict[str, Any]):
        with open(self.storage_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, sort_keys=True, default=str, ensure_ascii=False)
            f.write("\n")

    def save_reports(self, reports: List[DensificationReport], summary: Optional[Dict[str, Any]] = None,
                     metadata: Optional[Dict[str, Any]] = None):
        """Replace the stored reports with ``reports``"""
        data = self._empty()
        data["reports"] = [report.model_dump(mode="json") for report in reports]
        data["summary"] = summary or {}
        data["metadata"].update(metadata or {})
        self.save_data(data)

    def get_all_reports(self) -> List[DensificationReport]:
        data = self.load_data()
        return [DensificationReport.model_validate(entry) for entry in data.get("reports", [])]

    def get_reports_by_status(self, status: str) -> List[DensificationReport]:
        """Reports whose post-densification status equals ``status``"""
        return [report for report in self.get_all_reports() if report.post_status.value == status]

    def get_failed_reports(self) -> List[DensificationReport]:
        return [report for report in self.get_all_reports() if report.error]

    def get_summary(self) -> Dict[str, Any]:
        return self.load_data().get("summary", {})


def summarize_reports(reports: List[DensificationReport]) -> Dict[str, Any]:
    """Counts over a run's reports, keyed for the report JSON"""
    return {
        "instances": len({report.instance_id for report in reports}),
        "passes": len({report.pass_index for report in reports}),
        "flagged": sum(report.pre_status.value == "incomplete" for report in reports),
        "completed": sum(report.pre_status.value == "incomplete" and report.post_status.value == "complete"
                         for report in reports),
        "points_spawned": sum(report.points_spawned for report in reports),
        "opacity_adjusted": sum(report.opacity_adjusted for report in reports),
        "failures": sum(bool(report.error) for report in reports),
    }
