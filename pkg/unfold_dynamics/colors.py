class Colors:
    HEADER = '\033[95m'
    OKCYAN = '\033[96m'
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'

    PALETTE = ('HEADER', 'OKCYAN', 'OKGREEN', 'WARNING', 'FAIL', 'ENDC', 'BOLD')
    GOOD = frozenset({'pass', 'consistent', 'none', 'ok', 'stable'})
    SOFT = frozenset({'indeterminate', 'undetermined', 'limited', 'vacuous', 'skipped'})

    @staticmethod
    def disable():
        """Plain output for --no-color and non-terminal consumers."""
        for name in Colors.PALETTE:
            setattr(Colors, name, '')

    @staticmethod
    def paint(text: str, color: str) -> str:
        return f"{color}{text}{Colors.ENDC}"

    @staticmethod
    def outcome(label: str) -> str:
        """Colour a result label: passes green, undecided yellow, homoclinic cyan, anything else red."""
        if label in Colors.GOOD:
            return Colors.paint(label, Colors.OKGREEN)
        if label in Colors.SOFT:
            return Colors.paint(label, Colors.WARNING)
        if label == 'homoclinic':
            return Colors.paint(label, Colors.OKCYAN)
        return Colors.paint(label, Colors.FAIL)
