"""
Forms para validação das opções de linha de comando.
"""

from django import forms

from apps.core.exceptions import ModelValidationError
from apps.core.sampling import FAMILIES

FORMAT_CHOICES = [
    ('table', 'Tabela legível'),
    ('json', 'JSON estruturado'),
]

FORMAT_ALIASES = {'json-like': 'json'}


class RunConfigForm(forms.Form):
    """
    Opções comuns aos subcomandos.

    Campos vazios ficam None; o valor final segue a precedência
    flags > arquivo > SEMPLAN_SETTINGS > padrões.
    """

    model = forms.CharField(required=False)
    seed = forms.IntegerField(required=False, min_value=0)
    samples = forms.IntegerField(required=False, min_value=1)
    k_sigma = forms.FloatField(required=False, min_value=0.0)
    format = forms.ChoiceField(choices=FORMAT_CHOICES, required=False)
    out = forms.CharField(required=False)
    family = forms.ChoiceField(choices=[(name, name) for name in FAMILIES], required=False)
    workers = forms.IntegerField(required=False, min_value=1)
    chunk_size = forms.IntegerField(required=False, min_value=1)
    target_y = forms.FloatField(required=False)
    gain_a = forms.CharField(required=False)

    def __init__(self, data=None, *args, **kwargs):
        data = dict(data or {})
        if data.get('format') in FORMAT_ALIASES:
            data['format'] = FORMAT_ALIASES[data['format']]
        super().__init__(data, *args, **kwargs)

    def clean_format(self):
        return self.cleaned_data.get('format') or 'table'

    def options(self) -> dict:
        """
        Opções limpas.

        Raises:
            ModelValidationError: MalformedInput com o primeiro campo inválido
        """
        if not self.is_valid():
            name, messages = next(iter(self.errors.items()))
            raise ModelValidationError('MalformedInput', '; '.join(messages), f'--{name.replace("_", "-")}')
        return dict(self.cleaned_data)
