"""Command-line argument validation."""
import re
from pathlib import Path
from typing import List, Optional, Tuple


class ArgumentValidator:
    """Validate and normalize command-line values."""

    CAMERA_LIST_PATTERN = re.compile(r'^\s*\d+(\s*,\s*\d+)*\s*$')

    @classmethod
    def validate_camera_list(cls, text: Optional[str], num_cameras: int) -> Tuple[bool, Optional[str]]:
        """
        Validate a comma-separated camera list such as "0,2".

        Args:
            text: Raw flag value; None or empty means no cameras
            num_cameras: Cameras available in the scenario

        Returns:
            Tuple of (is_valid, error_message)
        """
        if text is None or not text.strip():
            return True, None
        if not cls.CAMERA_LIST_PATTERN.match(text):
            return False, f"Camera list '{text}' must be comma-separated integers"
        for camera in cls.parse_camera_list(text):
            if camera >= num_cameras:
                return False, f"Camera {camera} outside [0, {num_cameras})"
        return True, None

    @classmethod
    def parse_camera_list(cls, text: Optional[str]) -> List[int]:
        if text is None or not text.strip():
            return []
        return sorted({int(part) for part in text.split(',')})

    @classmethod
    def validate_fraction(cls, value: float, name: str, allow_zero: bool = False) -> Tuple[bool, Optional[str]]:
        low_ok = value >= 0.0 if allow_zero else value > 0.0
        if not (low_ok and value <= 1.0):
            interval = "[0, 1]" if allow_zero else "(0, 1]"
            return False, f"{name} must lie in {interval}, got {value}"
        return True, None

    @classmethod
    def validate_input_file(cls, path: Optional[Path], name: str) -> Tuple[bool, Optional[str]]:
        if path is None:
            return False, f"--{name} is required"
        if not Path(path).is_file():
            return False, f"{name} file not found: {path}"
        return True, None

    @classmethod
    def validate_ratios(cls, ratios: List[float]) -> Tuple[bool, Optional[str]]:
        if not ratios:
            return False, "At least one mask ratio is required"
        for rho in ratios:
            if not 0.0 <= rho < 1.0:
                return False, f"Mask ratio {rho} outside [0, 1)"
        return True, None
