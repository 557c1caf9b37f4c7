from .attacks import BaselineConfig, mifgsm_attack, pgd_attack, random_perm_control

__all__ = ["BaselineConfig", "pgd_attack", "mifgsm_attack", "random_perm_control"]
